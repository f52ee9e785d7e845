#pragma once

#include <map>
#include <string>

#include "rine/encoder.hpp"
#include "rine/insertion.hpp"

namespace rine {

// Anything that can score a partial linearized sequence: one label
// distribution plus start/end distributions over the m + 1 insertion points.
struct Scorer {
  virtual ~Scorer() = default;
  virtual ScorerOutput score(const LinearSeq& seq) const = 0;
  virtual size_t max_input_len() const = 0;  // longest accepted sequence
  virtual const Vocab& label_vocab() const = 0;
};

// Scores with a trained (or freshly initialized) encoder model.
class EncoderScorer : public Scorer {
 public:
  explicit EncoderScorer(const Model& model) : model_(&model) {}
  ScorerOutput score(const LinearSeq& seq) const override {
    return encode(*model_, seq);
  }
  size_t max_input_len() const override {
    return static_cast<size_t>(model_->config.max_len) - 2;  // BOS/EOS frame
  }
  const Vocab& label_vocab() const override { return model_->vocab; }

 private:
  const Model* model_;
};

// Replays the gold decomposition of a single tree with point-mass outputs.
// Exercises the decoding loop without any learned weights: on a gold partial
// it pins the next step, on the full linearization it pins EoP, anywhere
// else it throws PartialMismatch.
class OracleScorer : public Scorer {
 public:
  OracleScorer(const ParseTree& tree, Ordering ordering);
  ScorerOutput score(const LinearSeq& seq) const override;
  size_t max_input_len() const override { return max_len_; }
  const Vocab& label_vocab() const override { return vocab_; }

 private:
  Vocab vocab_;
  std::map<std::string, ScorerOutput> by_partial_;
  size_t max_len_ = 0;
};

}  // namespace rine
