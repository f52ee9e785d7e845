#include "rine/tree.hpp"

#include <sstream>

namespace rine {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorKind::MismatchedCloseLabel: return "MismatchedCloseLabel";
    case ErrorKind::EmptyNonTerminal: return "EmptyNonTerminal";
    case ErrorKind::RootNotIntent: return "RootNotIntent";
    case ErrorKind::ProfileViolation: return "ProfileViolation";
    case ErrorKind::BadLabel: return "BadLabel";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::CrossingSpan: return "CrossingSpan";
    case ErrorKind::PartialMismatch: return "PartialMismatch";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::TokenMismatch: return "TokenMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::LeafMismatch: return "LeafMismatch";
    case ErrorKind::SpecInconsistent: return "SpecInconsistent";
    case ErrorKind::InvalidInsertion: return "InvalidInsertion";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::BadRecord: return "BadRecord";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

std::string profile_name(TaskProfile profile) {
  return profile == TaskProfile::TOP ? "top" : "ner";
}

TaskProfile profile_from_name(const std::string& name) {
  if (name == "top") return TaskProfile::TOP;
  if (name == "ner") return TaskProfile::NestedNER;
  throw Error(ErrorKind::BadConfig, "unknown profile '" + name + "', expected top or ner");
}

Label Label::intent(const std::string& name) {
  if (name.rfind("IN:", 0) != 0 || name.size() <= 3)
    throw Error(ErrorKind::BadLabel, "intent name must be 'IN:<name>': " + name);
  return Label{LabelKind::Intent, name};
}

Label Label::slot(const std::string& name) {
  if (name.rfind("SL:", 0) != 0 || name.size() <= 3)
    throw Error(ErrorKind::BadLabel, "slot name must be 'SL:<name>': " + name);
  return Label{LabelKind::Slot, name};
}

Label Label::from_name(const std::string& name) {
  if (name.rfind("IN:", 0) == 0) return intent(name);
  if (name.rfind("SL:", 0) == 0) return slot(name);
  throw Error(ErrorKind::BadLabel, "label without IN:/SL: prefix: " + name);
}

SeqElem SeqElem::open(Label l) {
  if (l.kind != LabelKind::Intent && l.kind != LabelKind::Slot)
    throw Error(ErrorKind::BadLabel, "open bracket must carry an intent/slot label");
  SeqElem e;
  e.kind = Kind::Open;
  e.label = std::move(l);
  return e;
}

SeqElem SeqElem::close(Label l) {
  if (l.kind != LabelKind::Intent && l.kind != LabelKind::Slot)
    throw Error(ErrorKind::BadLabel, "close bracket must carry an intent/slot label");
  SeqElem e;
  e.kind = Kind::Close;
  e.label = std::move(l);
  return e;
}

bool TreeNode::operator==(const TreeNode& o) const {
  if (leaf != o.leaf) return false;
  if (leaf) return token == o.token;
  return label == o.label && children == o.children;
}

namespace {

void validate_node(const TreeNode& n, bool is_root, TaskProfile profile) {
  if (n.leaf) {
    if (n.token.empty())
      throw Error(ErrorKind::BadRecord, "empty leaf token");
    return;
  }
  if (n.children.empty())
    throw Error(ErrorKind::EmptyNonTerminal,
                "non-terminal " + n.label.name + " has no children");
  if (n.label.kind == LabelKind::Root && !is_root)
    throw Error(ErrorKind::ProfileViolation, "virtual root below the root");
  if (profile == TaskProfile::NestedNER && n.label.kind == LabelKind::Intent)
    throw Error(ErrorKind::ProfileViolation,
                "intent label in NER profile: " + n.label.name);
  for (const auto& c : n.children) validate_node(c, false, profile);
}

void collect_leaves(const TreeNode& n, std::vector<std::string>& out) {
  if (n.leaf) {
    out.push_back(n.token);
    return;
  }
  for (const auto& c : n.children) collect_leaves(c, out);
}

size_t count_non_terminals(const TreeNode& n) {
  if (n.leaf) return 0;
  size_t c = (n.label.kind == LabelKind::Intent ||
              n.label.kind == LabelKind::Slot)
                 ? 1
                 : 0;
  for (const auto& ch : n.children) c += count_non_terminals(ch);
  return c;
}

void emit_linear(const TreeNode& n, LinearSeq& out) {
  if (n.leaf) {
    out.push_back(SeqElem::tok(n.token));
    return;
  }
  bool real = n.label.kind != LabelKind::Root;
  if (real) out.push_back(SeqElem::open(n.label));
  for (const auto& c : n.children) emit_linear(c, out);
  if (real) out.push_back(SeqElem::close(n.label));
}

// depth-1 check: flat means no non-terminal sits below another
// non-terminal other than the tree's own root
bool flat_below(const TreeNode& n) {
  for (const auto& c : n.children) {
    if (c.leaf) continue;
    for (const auto& g : c.children)
      if (!g.leaf) return false;
  }
  return true;
}

size_t collect_spans(const TreeNode& n, size_t tok_pos,
                     std::set<LabeledSpan>& out) {
  if (n.leaf) return tok_pos + 1;
  size_t end = tok_pos;
  for (const auto& c : n.children) end = collect_spans(c, end, out);
  if (n.label.kind == LabelKind::Intent || n.label.kind == LabelKind::Slot)
    out.insert(LabeledSpan{n.label, tok_pos, end});
  return end;
}

}  // namespace

void ParseTree::validate() const {
  if (profile == TaskProfile::TOP) {
    if (root.leaf || root.label.kind != LabelKind::Intent)
      throw Error(ErrorKind::RootNotIntent, "TOP root must be an intent");
  } else {
    if (root.leaf || root.label.kind != LabelKind::Root)
      throw Error(ErrorKind::ProfileViolation, "NER root must be the virtual root");
    if (root.children.empty())
      throw Error(ErrorKind::EmptyNonTerminal, "NER virtual root has no children");
    for (const auto& c : root.children) validate_node(c, false, profile);
    return;
  }
  validate_node(root, true, profile);
}

std::vector<std::string> ParseTree::leaves() const {
  std::vector<std::string> out;
  collect_leaves(root, out);
  return out;
}

size_t ParseTree::token_count() const { return leaves().size(); }

size_t ParseTree::non_terminal_count() const {
  return count_non_terminals(root);
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

LinearSeq lex_linearized(const std::string& text, TreeFormat format) {
  LinearSeq seq;
  std::vector<Label> stack;
  size_t pos = 0;
  for (const auto& tok : split_whitespace(text)) {
    if (tok.size() > 1 && tok.front() == '[') {
      Label l = Label::from_name(tok.substr(1));
      stack.push_back(l);
      seq.push_back(SeqElem::open(l));
    } else if (format == TreeFormat::PlainClose && tok == "]") {
      if (stack.empty())
        throw Error(ErrorKind::UnbalancedBrackets,
                    "close without open at element " + std::to_string(pos));
      seq.push_back(SeqElem::close(stack.back()));
      stack.pop_back();
    } else if (format == TreeFormat::LabeledClose && tok.size() > 1 &&
               tok.back() == ']') {
      Label l = Label::from_name(tok.substr(0, tok.size() - 1));
      if (stack.empty())
        throw Error(ErrorKind::UnbalancedBrackets,
                    "close without open at element " + std::to_string(pos));
      if (!(stack.back() == l))
        throw Error(ErrorKind::MismatchedCloseLabel,
                    "close " + l.name + " does not match open " +
                        stack.back().name + " at element " + std::to_string(pos));
      seq.push_back(SeqElem::close(l));
      stack.pop_back();
    } else {
      seq.push_back(SeqElem::tok(tok));
    }
    ++pos;
  }
  if (!stack.empty())
    throw Error(ErrorKind::UnbalancedBrackets,
                std::to_string(stack.size()) + " unmatched open bracket(s) at end");
  return seq;
}

std::string seq_to_string(const LinearSeq& seq, TreeFormat format) {
  std::string out;
  for (const auto& e : seq) {
    if (!out.empty()) out += ' ';
    switch (e.kind) {
      case SeqElem::Kind::Tok:
        out += e.token;
        break;
      case SeqElem::Kind::Open:
        out += '[';
        out += e.label.name;
        break;
      case SeqElem::Kind::Close:
        if (format == TreeFormat::LabeledClose) {
          out += e.label.name;
          out += ']';
        } else {
          out += ']';
        }
        break;
    }
  }
  return out;
}

bool is_balanced(const LinearSeq& seq) {
  std::vector<const Label*> stack;
  for (const auto& e : seq) {
    if (e.kind == SeqElem::Kind::Open) {
      stack.push_back(&e.label);
    } else if (e.kind == SeqElem::Kind::Close) {
      if (stack.empty() || !(*stack.back() == e.label)) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

ParseTree from_linear(const LinearSeq& seq, TaskProfile profile) {
  // stack of open constituents; bottom frame is the virtual top level
  std::vector<std::vector<TreeNode>> frames(1);
  std::vector<Label> labels;
  size_t pos = 0;
  for (const auto& e : seq) {
    switch (e.kind) {
      case SeqElem::Kind::Tok:
        frames.back().push_back(TreeNode::make_leaf(e.token));
        break;
      case SeqElem::Kind::Open:
        frames.emplace_back();
        labels.push_back(e.label);
        break;
      case SeqElem::Kind::Close: {
        if (labels.empty())
          throw Error(ErrorKind::UnbalancedBrackets,
                      "close without open at element " + std::to_string(pos));
        if (!(labels.back() == e.label))
          throw Error(ErrorKind::MismatchedCloseLabel,
                      "close " + e.label.name + " does not match open " +
                          labels.back().name);
        if (frames.back().empty())
          throw Error(ErrorKind::EmptyNonTerminal,
                      "empty constituent " + e.label.name);
        TreeNode node = TreeNode::make_node(labels.back(), std::move(frames.back()));
        frames.pop_back();
        labels.pop_back();
        frames.back().push_back(std::move(node));
        break;
      }
    }
    ++pos;
  }
  if (!labels.empty())
    throw Error(ErrorKind::UnbalancedBrackets,
                std::to_string(labels.size()) + " unmatched open bracket(s)");

  ParseTree tree;
  tree.profile = profile;
  if (profile == TaskProfile::TOP) {
    if (frames[0].size() != 1 || frames[0][0].leaf ||
        frames[0][0].label.kind != LabelKind::Intent)
      throw Error(ErrorKind::RootNotIntent,
                  "TOP tree must be a single intent constituent");
    tree.root = std::move(frames[0][0]);
  } else {
    if (frames[0].empty())
      throw Error(ErrorKind::EmptyNonTerminal, "empty utterance");
    tree.root = TreeNode::make_node(Label::virtual_root(), std::move(frames[0]));
  }
  tree.validate();
  return tree;
}

LinearSeq to_linear(const ParseTree& tree) {
  LinearSeq out;
  emit_linear(tree.root, out);
  return out;
}

ParseTree parse_linearized(const std::string& text, TreeFormat format,
                           TaskProfile profile) {
  return from_linear(lex_linearized(text, format), profile);
}

std::string serialize(const ParseTree& tree, TreeFormat format) {
  return seq_to_string(to_linear(tree), format);
}

bool is_flat(const ParseTree& tree) {
  return flat_below(tree.root);
}

std::set<LabeledSpan> spans(const ParseTree& tree) {
  std::set<LabeledSpan> out;
  collect_spans(tree.root, 0, out);
  return out;
}

}  // namespace rine
