#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rine/decoder.hpp"
#include "rine/encoder.hpp"

namespace rine {

// One teacher-forced example: a gold partial plus the action taken on it.
struct TrainInstance {
  LinearSeq input;
  Label gold_label;  // EoP on the terminal instance
  bool has_position = false;
  size_t gold_start = 0;
  size_t gold_end = 0;
};

// Every decomposition step of every tree, plus one EoP instance per tree
// whose input is the full linearization.
std::vector<TrainInstance> build_instances(const std::vector<ParseTree>& corpus,
                                           Ordering ordering);

// Negative log-likelihood of the instance under an already-computed output;
// EoP instances score the label only.
double loss_from_output(const ScorerOutput& out, const TrainInstance& inst,
                        const Vocab& vocab);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr_peak = 5e-4;
  int warmup_steps = 500;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-6;
  double weight_decay = 1e-4;
  uint64_t seed = 1;
  double early_stop_em = 1.0;  // stop once validation EM reaches this
  unsigned workers = 1;        // validation decoding only

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Linear warmup to lr_peak, then inverse square-root decay. Steps are 1-based
// optimizer updates.
double lr_at(const TrainConfig& cfg, int64_t step);

struct EpochStats {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double em = 0.0;  // validation exact match
};

struct TrainResult {
  Model model;  // highest validation EM, ties broken by lower loss
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_em = 0.0;
};

// Teacher-forced training with Adam and L2 weight decay. Deterministic for a
// fixed config seed. A non-finite loss aborts with the offending batch id.
TrainResult train(const std::vector<ParseTree>& train_set,
                  const std::vector<ParseTree>& valid_set,
                  const EncoderConfig& enc_cfg, const TrainConfig& cfg,
                  Ordering ordering);

// Compares analytic gradients against central finite differences on
// `samples` randomly chosen parameters per tensor; returns the worst
// relative error.
double grad_check(const Model& model, const TrainInstance& inst,
                  double epsilon, size_t samples = 200, uint64_t seed = 1);

}  // namespace rine
