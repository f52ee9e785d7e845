#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rine/common.hpp"

namespace rine {

// Non-terminal label of a TOP-style parse tree. Intent names carry the
// "IN:" prefix, slot names the "SL:" prefix. EoP is the end-of-prediction
// symbol used by the scorer's label vocabulary; it never appears in trees.
// Root is the synthetic virtual root used by the nested-NER profile and is
// never serialized.
enum class LabelKind { Intent, Slot, EoP, Root };

struct Label {
  LabelKind kind = LabelKind::EoP;
  std::string name;  // full prefixed name; empty for EoP and Root

  static Label intent(const std::string& name);
  static Label slot(const std::string& name);
  static Label eop() { return Label{LabelKind::EoP, ""}; }
  static Label virtual_root() { return Label{LabelKind::Root, ""}; }

  // Builds a label from a prefixed name ("IN:..." / "SL:...").
  static Label from_name(const std::string& name);

  bool operator==(const Label& o) const {
    return kind == o.kind && name == o.name;
  }
  auto operator<=>(const Label& o) const {
    if (auto c = kind <=> o.kind; c != 0) return c;
    return name <=> o.name;
  }
};

// One element of a linearized tree.
struct SeqElem {
  enum class Kind { Tok, Open, Close };
  Kind kind = Kind::Tok;
  std::string token;    // Tok only
  Label label;          // Open/Close only
  uint32_t vocab_id = 0;  // Tok annotation, not part of identity

  static SeqElem tok(std::string t, uint32_t id = 0) {
    SeqElem e;
    e.kind = Kind::Tok;
    e.token = std::move(t);
    e.vocab_id = id;
    return e;
  }
  static SeqElem open(Label l);
  static SeqElem close(Label l);

  bool operator==(const SeqElem& o) const {
    if (kind != o.kind) return false;
    return kind == Kind::Tok ? token == o.token : label == o.label;
  }
};

// The mutable linearized tree; a token-only sequence is the bare utterance.
using LinearSeq = std::vector<SeqElem>;

enum class TaskProfile { TOP, NestedNER };

// "top" / "ner"
std::string profile_name(TaskProfile profile);
TaskProfile profile_from_name(const std::string& name);

enum class TreeFormat { LabeledClose, PlainClose };

// Parse tree node: either a leaf token or a labeled non-terminal with
// ordered children. Non-terminals always have at least one child.
struct TreeNode {
  bool leaf = false;
  std::string token;  // leaf only
  Label label;        // internal only
  std::vector<TreeNode> children;

  static TreeNode make_leaf(std::string tok) {
    TreeNode n;
    n.leaf = true;
    n.token = std::move(tok);
    return n;
  }
  static TreeNode make_node(Label l, std::vector<TreeNode> ch) {
    TreeNode n;
    n.label = std::move(l);
    n.children = std::move(ch);
    return n;
  }

  bool operator==(const TreeNode& o) const;
};

// TOP profile: root is the top-level intent. NestedNER profile: root is a
// virtual node (LabelKind::Root) whose children are tokens and slot nodes;
// the virtual root never appears in serializations or span sets.
struct ParseTree {
  TaskProfile profile = TaskProfile::TOP;
  TreeNode root;

  bool operator==(const ParseTree& o) const {
    return profile == o.profile && root == o.root;
  }

  // Throws if any structural invariant is violated.
  void validate() const;

  std::vector<std::string> leaves() const;
  size_t token_count() const;
  // Number of real non-terminals (virtual root excluded).
  size_t non_terminal_count() const;
};

// (label, start, end) over token positions, half-open.
struct LabeledSpan {
  Label label;
  size_t start = 0;
  size_t end = 0;

  bool operator==(const LabeledSpan&) const = default;
  auto operator<=>(const LabeledSpan&) const = default;
};

ParseTree parse_linearized(const std::string& text, TreeFormat format,
                           TaskProfile profile = TaskProfile::TOP);
std::string serialize(const ParseTree& tree, TreeFormat format);

LinearSeq to_linear(const ParseTree& tree);
ParseTree from_linear(const LinearSeq& seq, TaskProfile profile);

bool is_flat(const ParseTree& tree);
std::set<LabeledSpan> spans(const ParseTree& tree);

// Splits on whitespace into element tokens under the given format.
// Validates bracket balance; element positions are reported in errors.
LinearSeq lex_linearized(const std::string& text, TreeFormat format);
std::string seq_to_string(const LinearSeq& seq, TreeFormat format);

// True iff every Close matches the most recent unmatched Open and no
// Open is left unmatched.
bool is_balanced(const LinearSeq& seq);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace rine
