#include "rine/scorer.hpp"

#include <cmath>
#include <limits>

namespace rine {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> point_mass(size_t size, size_t at) {
  std::vector<double> out(size, kNegInf);
  out[at] = 0.0;
  return out;
}

}  // namespace

OracleScorer::OracleScorer(const ParseTree& tree, Ordering ordering)
    : vocab_(Vocab::build({tree})) {
  const size_t labels = vocab_.label_vocab_size();
  for (const auto& ds : decompose(tree, ordering)) {
    const size_t m = ds.partial.size();
    ScorerOutput out;
    out.label_logprobs =
        point_mass(labels, static_cast<size_t>(vocab_.label_id(ds.step.label)));
    out.start_logprobs = point_mass(m + 1, ds.step.i);
    out.end_logprobs = point_mass(m + 1, ds.step.j);
    by_partial_[seq_to_string(ds.partial, TreeFormat::LabeledClose)] = std::move(out);
  }
  LinearSeq full = to_linear(tree);
  const size_t m = full.size();
  max_len_ = m;
  ScorerOutput eop;
  eop.label_logprobs =
      point_mass(labels, static_cast<size_t>(vocab_.eop_id()));
  // positions are moot at EoP; keep the rows normalized anyway
  eop.start_logprobs.assign(m + 1, -std::log(static_cast<double>(m + 1)));
  eop.end_logprobs = eop.start_logprobs;
  by_partial_[seq_to_string(full, TreeFormat::LabeledClose)] = std::move(eop);
}

ScorerOutput OracleScorer::score(const LinearSeq& seq) const {
  auto it = by_partial_.find(seq_to_string(seq, TreeFormat::LabeledClose));
  if (it == by_partial_.end())
    throw Error(ErrorKind::PartialMismatch,
                "sequence is not a gold partial: " + seq_to_string(seq, TreeFormat::LabeledClose));
  return it->second;
}

}  // namespace rine
