#include "rine/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace rine {
namespace {

using nlohmann::json;

StepTargets to_targets(const TrainInstance& inst, const Vocab& vocab) {
  StepTargets t;
  t.label_id = vocab.label_id(inst.gold_label);
  t.has_position = inst.has_position;
  t.start = inst.gold_start;
  t.end = inst.gold_end;
  return t;
}

std::vector<Mat*> tensor_list(ParamSet& p) {
  std::vector<Mat*> out;
  visit_params(p, [&](const std::string&, Mat& m) { out.push_back(&m); });
  return out;
}

// one Adam update with L2 decay folded into the gradient
void adam_step(ParamSet& params, ParamSet& grads, ParamSet& m1, ParamSet& m2,
               int64_t t, double lr, const TrainConfig& cfg) {
  auto ps = tensor_list(params);
  auto gs = tensor_list(grads);
  auto m1s = tensor_list(m1);
  auto m2s = tensor_list(m2);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t k = 0; k < ps.size(); k++) {
    Mat& p = *ps[k];
    Mat& g = *gs[k];
    if (cfg.weight_decay > 0.0) g += cfg.weight_decay * p;
    *m1s[k] = cfg.beta1 * *m1s[k] + (1.0 - cfg.beta1) * g;
    *m2s[k] = cfg.beta2 * *m2s[k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Mat mhat = *m1s[k] / c1;
    Mat vhat = *m2s[k] / c2;
    p.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.adam_eps);
  }
}

double validation_em(const Model& model, const std::vector<ParseTree>& valid,
                     unsigned workers) {
  if (valid.empty()) return 0.0;
  std::vector<std::vector<std::string>> utterances;
  utterances.reserve(valid.size());
  for (const auto& t : valid) utterances.push_back(t.leaves());
  EncoderScorer scorer(model);
  CorpusDecodeResult out =
      decode_corpus(scorer, utterances, model.profile, DecodeConfig{}, workers);
  size_t hits = 0;
  for (size_t k = 0; k < valid.size(); k++) {
    const auto& sr = out.sentences[k];
    if (sr.error.empty() && sr.tree.has_value() && *sr.tree == valid[k]) hits++;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.size());
}

}  // namespace

std::vector<TrainInstance> build_instances(const std::vector<ParseTree>& corpus,
                                           Ordering ordering) {
  std::vector<TrainInstance> out;
  for (const ParseTree& tree : corpus) {
    for (const auto& ds : decompose(tree, ordering)) {
      TrainInstance inst;
      inst.input = ds.partial;
      inst.gold_label = ds.step.label;
      inst.has_position = true;
      inst.gold_start = ds.step.i;
      inst.gold_end = ds.step.j;
      out.push_back(std::move(inst));
    }
    TrainInstance eop;
    eop.input = to_linear(tree);
    eop.gold_label = Label::eop();
    out.push_back(std::move(eop));
  }
  return out;
}

double loss_from_output(const ScorerOutput& out, const TrainInstance& inst,
                        const Vocab& vocab) {
  int label_id = vocab.label_id(inst.gold_label);
  if (label_id < 0 || label_id >= static_cast<int>(out.label_logprobs.size()))
    throw Error(ErrorKind::IndexOutOfRange, "label id outside the output");
  double loss = -out.label_logprobs[static_cast<size_t>(label_id)];
  if (inst.has_position) {
    if (inst.gold_start >= out.start_logprobs.size() ||
        inst.gold_end >= out.end_logprobs.size())
      throw Error(ErrorKind::IndexOutOfRange,
                  "position target outside the output");
    loss -= out.start_logprobs[inst.gold_start];
    loss -= out.end_logprobs[inst.gold_end];
  }
  return loss;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::BadConfig, msg);
  };
  if (epochs < 1) fail("epochs must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (lr_peak <= 0.0) fail("lr_peak must be positive");
  if (warmup_steps < 1) fail("warmup_steps must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    fail("betas must lie in [0, 1)");
  if (adam_eps <= 0.0) fail("adam_eps must be positive");
  if (weight_decay < 0.0) fail("weight_decay must not be negative");
  if (workers < 1) fail("workers must be positive");
}

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr_peak"] = lr_peak;
  j["warmup_steps"] = warmup_steps;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["weight_decay"] = weight_decay;
  j["seed"] = seed;
  j["early_stop_em"] = early_stop_em;
  j["workers"] = workers;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("config: ") + e.what());
  }
  TrainConfig cfg;
  auto grab = [&](const char* key, auto& out) {
    if (j.contains(key)) {
      j.at(key).get_to(out);
      j.erase(key);
    }
  };
  try {
    grab("epochs", cfg.epochs);
    grab("batch_size", cfg.batch_size);
    grab("lr_peak", cfg.lr_peak);
    grab("warmup_steps", cfg.warmup_steps);
    grab("beta1", cfg.beta1);
    grab("beta2", cfg.beta2);
    grab("adam_eps", cfg.adam_eps);
    grab("weight_decay", cfg.weight_decay);
    grab("seed", cfg.seed);
    grab("early_stop_em", cfg.early_stop_em);
    grab("workers", cfg.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("config: ") + e.what());
  }
  if (!j.empty())
    throw Error(ErrorKind::BadConfig, "unknown config key: " + j.begin().key());
  cfg.validate();
  return cfg;
}

double lr_at(const TrainConfig& cfg, int64_t step) {
  if (step < 1)
    throw Error(ErrorKind::IndexOutOfRange, "schedule steps start at 1");
  const double w = static_cast<double>(cfg.warmup_steps);
  const double s = static_cast<double>(step);
  if (s <= w) return cfg.lr_peak * s / w;
  return cfg.lr_peak * std::sqrt(w / s);
}

TrainResult train(const std::vector<ParseTree>& train_set,
                  const std::vector<ParseTree>& valid_set,
                  const EncoderConfig& enc_cfg, const TrainConfig& cfg,
                  Ordering ordering) {
  enc_cfg.validate();
  cfg.validate();
  if (train_set.empty())
    throw Error(ErrorKind::BadRecord, "training corpus is empty");
  const TaskProfile profile = train_set[0].profile;
  for (const auto& t : train_set)
    if (t.profile != profile)
      throw Error(ErrorKind::ProfileViolation, "mixed profiles in training set");
  for (const auto& t : valid_set)
    if (t.profile != profile)
      throw Error(ErrorKind::ProfileViolation, "validation profile differs");

  std::vector<TrainInstance> instances = build_instances(train_set, ordering);
  const size_t room = static_cast<size_t>(enc_cfg.max_len) - 2;
  for (size_t k = 0; k < instances.size(); k++)
    if (instances[k].input.size() > room)
      throw Error(ErrorKind::SequenceTooLong,
                  "instance " + std::to_string(k) + " needs " +
                      std::to_string(instances[k].input.size() + 2) +
                      " rows but max_len is " + std::to_string(enc_cfg.max_len));

  Vocab vocab = Vocab::build(train_set);
  Model model = Model::init(enc_cfg, std::move(vocab), profile, cfg.seed);
  ParamSet grads = ParamSet::shaped(enc_cfg, model.vocab.elem_vocab_size(),
                                    model.vocab.label_vocab_size());
  ParamSet m1 = grads, m2 = grads;  // zero-filled moments

  Rng shuffle_rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<size_t> order(instances.size());
  for (size_t k = 0; k < order.size(); k++) order[k] = k;

  TrainResult res;
  double best_loss = std::numeric_limits<double>::infinity();
  res.best_em = -1.0;
  ParamSet best_params = model.params;
  int64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; epoch++) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t at = 0; at < order.size();) {
      const size_t take =
          std::min(static_cast<size_t>(cfg.batch_size), order.size() - at);
      grads.zero();
      for (size_t b = 0; b < take; b++) {
        const TrainInstance& inst = instances[order[at + b]];
        try {
          loss_sum += loss_and_grad(model, inst.input,
                                    to_targets(inst, model.vocab),
                                    dropout_rng.next(), grads);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::NonFiniteLoss)
            throw Error(ErrorKind::NonFiniteLoss,
                        "batch " + std::to_string(step + 1) + " in epoch " +
                            std::to_string(epoch) + ": " + e.what());
          throw;
        }
      }
      const double inv = 1.0 / static_cast<double>(take);
      visit_params(grads, [&](const std::string&, Mat& g) { g *= inv; });
      step++;
      adam_step(model.params, grads, m1, m2, step, lr_at(cfg, step), cfg);
      at += take;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(instances.size());
    stats.em = validation_em(model, valid_set, cfg.workers);
    res.history.push_back(stats);
    if (stats.em > res.best_em ||
        (stats.em == res.best_em && stats.loss < best_loss)) {
      res.best_em = stats.em;
      best_loss = stats.loss;
      res.best_epoch = epoch;
      best_params = model.params;
    }
    if (stats.em >= cfg.early_stop_em) break;
  }

  model.params = std::move(best_params);
  res.model = std::move(model);
  return res;
}

double grad_check(const Model& model, const TrainInstance& inst,
                  double epsilon, size_t samples, uint64_t seed) {
  Model work = model;
  const StepTargets targets = to_targets(inst, work.vocab);
  const uint64_t dropout_seed = 0x5bd1e995u;
  ParamSet grads = ParamSet::shaped(work.config, work.vocab.elem_vocab_size(),
                                    work.vocab.label_vocab_size());
  loss_and_grad(work, inst.input, targets, dropout_seed, grads);

  auto ps = tensor_list(work.params);
  auto gs = tensor_list(grads);
  Rng rng(seed);
  double worst = 0.0;
  for (size_t k = 0; k < ps.size(); k++) {
    Mat& p = *ps[k];
    const Mat& g = *gs[k];
    const size_t n = static_cast<size_t>(p.size());
    const size_t tries = std::min(samples, n);
    for (size_t s = 0; s < tries; s++) {
      const size_t flat = n == tries ? s : static_cast<size_t>(rng.below(n));
      const long r = static_cast<long>(flat) / p.cols();
      const long c = static_cast<long>(flat) % p.cols();
      const double orig = p(r, c);
      p(r, c) = orig + epsilon;
      const double up = loss_value(work, inst.input, targets, dropout_seed);
      p(r, c) = orig - epsilon;
      const double down = loss_value(work, inst.input, targets, dropout_seed);
      p(r, c) = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = g(r, c);
      const double rel = std::abs(numeric - analytic) /
                         std::max({1.0, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace rine
