#include "rine/vocab.hpp"

namespace rine {

void Vocab::add_token(const std::string& tok) {
  if (token_ids_.emplace(tok, static_cast<int>(tokens_.size())).second)
    tokens_.push_back(tok);
}

void Vocab::add_label(const Label& l) {
  if (label_ids_.emplace(l.name, static_cast<int>(labels_.size())).second)
    labels_.push_back(l);
}

Vocab Vocab::build(const std::vector<ParseTree>& trees) {
  Vocab v;
  for (const auto& tree : trees) {
    for (const auto& e : to_linear(tree)) {
      if (e.kind == SeqElem::Kind::Tok)
        v.add_token(e.token);
      else if (e.kind == SeqElem::Kind::Open)
        v.add_label(e.label);
    }
  }
  return v;
}

Vocab Vocab::from_parts(std::vector<std::string> tokens,
                        const std::vector<std::string>& label_names) {
  Vocab v;
  for (auto& tok : tokens) {
    if (tok.empty()) throw Error(ErrorKind::BadRecord, "empty vocabulary token");
    v.add_token(tok);
  }
  if (v.tokens_.size() != tokens.size())
    throw Error(ErrorKind::BadRecord, "duplicate vocabulary token");
  for (const auto& name : label_names) v.add_label(Label::from_name(name));
  if (v.labels_.size() != label_names.size())
    throw Error(ErrorKind::BadRecord, "duplicate vocabulary label");
  return v;
}

int Vocab::elem_id(const SeqElem& e) const {
  switch (e.kind) {
    case SeqElem::Kind::Tok:
      return token_id(e.token);
    case SeqElem::Kind::Open:
      return kBase + static_cast<int>(tokens_.size()) + label_id(e.label);
    case SeqElem::Kind::Close:
      return kBase + static_cast<int>(tokens_.size() + labels_.size()) +
             label_id(e.label);
  }
  throw Error(ErrorKind::BadRecord, "corrupt sequence element");
}

int Vocab::label_id(const Label& l) const {
  if (l.kind == LabelKind::EoP) return eop_id();
  auto it = label_ids_.find(l.name);
  if (it == label_ids_.end())
    throw Error(ErrorKind::BadLabel, "label outside vocabulary: " + l.name);
  return it->second;
}

const Label& Vocab::label_at(size_t id) const {
  if (id >= labels_.size())
    throw Error(ErrorKind::IndexOutOfRange,
                "label id " + std::to_string(id) + " out of range");
  return labels_[id];
}

std::vector<int> Vocab::encode(const LinearSeq& seq) const {
  std::vector<int> ids;
  ids.reserve(seq.size() + 2);
  ids.push_back(kBos);
  for (const auto& e : seq) ids.push_back(elem_id(e));
  ids.push_back(kEos);
  return ids;
}

std::vector<std::string> Vocab::label_names() const {
  std::vector<std::string> names;
  names.reserve(labels_.size());
  for (const auto& l : labels_) names.push_back(l.name);
  return names;
}

}  // namespace rine
