#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rine/tree.hpp"

namespace rine {

// Element vocabulary layout: 4 specials, then tokens, then one Open id per
// label, then one Close id per label. The label head vocabulary is the
// label list plus EoP as the final id.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kBase = 4;

  Vocab() = default;

  // Collects tokens and labels from the trees in first-seen order.
  static Vocab build(const std::vector<ParseTree>& trees);
  static Vocab from_parts(std::vector<std::string> tokens,
                          const std::vector<std::string>& label_names);

  size_t token_count() const { return tokens_.size(); }
  size_t label_count() const { return labels_.size(); }
  size_t elem_vocab_size() const { return kBase + tokens_.size() + 2 * labels_.size(); }
  size_t label_vocab_size() const { return labels_.size() + 1; }
  int eop_id() const { return static_cast<int>(labels_.size()); }

  int token_id(const std::string& tok) const {
    auto it = token_ids_.find(tok);
    return it == token_ids_.end() ? kUnk : kBase + it->second;
  }
  int elem_id(const SeqElem& e) const;
  // Throws BadLabel for labels outside the vocabulary.
  int label_id(const Label& l) const;
  const Label& label_at(size_t id) const;

  // [BOS] + element ids + [EOS]
  std::vector<int> encode(const LinearSeq& seq) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<Label>& labels() const { return labels_; }
  std::vector<std::string> label_names() const;

  bool operator==(const Vocab& o) const {
    return tokens_ == o.tokens_ && labels_ == o.labels_;
  }

 private:
  void add_token(const std::string& tok);
  void add_label(const Label& l);

  std::vector<std::string> tokens_;
  std::vector<Label> labels_;
  std::unordered_map<std::string, int> token_ids_;
  std::unordered_map<std::string, int> label_ids_;  // by prefixed name
};

}  // namespace rine
