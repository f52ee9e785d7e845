#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rine/common.hpp"
#include "rine/vocab.hpp"

namespace rine {

using Mat = Eigen::MatrixXd;

struct EncoderConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int label_head_hidden = 64;
  int max_len = 128;        // input rows including the BOS/EOS frame
  int start_head = 0;       // last-layer head whose BOS row scores starts
  int end_head = 1;
  double dropout = 0.1;
  double attn_dropout = 0.1;

  // Throws BadConfig on violated constraints.
  void validate() const;
  std::string to_json() const;
  static EncoderConfig from_json(const std::string& text);
};

// All weights are dense matrices; vectors are 1 x n rows.
struct LayerParams {
  Mat ln1_g, ln1_b;
  Mat wq, wk, wv, wo;  // d x d
  Mat bq, bk, bv, bo;  // 1 x d
  Mat ln2_g, ln2_b;
  Mat w1, b1;  // d x f, 1 x f
  Mat w2, b2;  // f x d, 1 x d
};

struct ParamSet {
  Mat tok_emb;  // elem vocab x d
  Mat pos_emb;  // max_len x d
  std::vector<LayerParams> layers;
  Mat lnf_g, lnf_b;      // 1 x d
  Mat head_w1, head_b1;  // d x h, 1 x h
  Mat head_w2, head_b2;  // h x labels, 1 x labels

  // Zero-filled tensors with the right shapes.
  static ParamSet shaped(const EncoderConfig& cfg, size_t elem_vocab,
                         size_t label_vocab);
  void init(uint64_t seed);  // N(0, 0.02) weights, LN gains 1, biases 0
  void zero();
  size_t scalar_count() const;
};

// Visits every tensor as (name, Mat&) in a fixed order.
template <typename PS, typename F>
void visit_params(PS& p, F&& f) {
  f("tok_emb", p.tok_emb);
  f("pos_emb", p.pos_emb);
  for (size_t l = 0; l < p.layers.size(); l++) {
    auto& L = p.layers[l];
    std::string pre = "layer" + std::to_string(l) + ".";
    f(pre + "ln1_g", L.ln1_g);
    f(pre + "ln1_b", L.ln1_b);
    f(pre + "wq", L.wq);
    f(pre + "bq", L.bq);
    f(pre + "wk", L.wk);
    f(pre + "bk", L.bk);
    f(pre + "wv", L.wv);
    f(pre + "bv", L.bv);
    f(pre + "wo", L.wo);
    f(pre + "bo", L.bo);
    f(pre + "ln2_g", L.ln2_g);
    f(pre + "ln2_b", L.ln2_b);
    f(pre + "w1", L.w1);
    f(pre + "b1", L.b1);
    f(pre + "w2", L.w2);
    f(pre + "b2", L.b2);
  }
  f("lnf_g", p.lnf_g);
  f("lnf_b", p.lnf_b);
  f("head_w1", p.head_w1);
  f("head_b1", p.head_b1);
  f("head_w2", p.head_w2);
  f("head_b2", p.head_b2);
}

struct Model {
  EncoderConfig config;
  Vocab vocab;
  TaskProfile profile = TaskProfile::TOP;
  ParamSet params;

  static Model init(const EncoderConfig& cfg, Vocab vocab, TaskProfile profile,
                    uint64_t seed);
  void save(const std::string& path) const;
  static Model load(const std::string& path);
};

// One scoring pass over a linearized sequence of m elements.
struct ScorerOutput {
  std::vector<double> label_logprobs;  // label vocab incl. EoP
  std::vector<double> start_logprobs;  // m + 1 insertion points
  std::vector<double> end_logprobs;    // m + 1 insertion points
};

// Inference pass (dropout off). Throws SequenceTooLong / NonFiniteActivation.
ScorerOutput encode(const Model& model, const LinearSeq& seq);

// Teacher-forcing targets for one decomposition step. Positions are
// insertion-point indices into [0, m]; EoP instances carry none.
struct StepTargets {
  int label_id = 0;
  bool has_position = false;
  size_t start = 0;
  size_t end = 0;
};

// Training pass: cross-entropy of the targets, gradients accumulated into
// `grads` (shapes from ParamSet::shaped). Dropout masks derive from
// `dropout_seed` only, so a seed replays identically.
double loss_and_grad(const Model& model, const LinearSeq& seq,
                     const StepTargets& targets, uint64_t dropout_seed,
                     ParamSet& grads);

// Same forward pass and loss without touching gradients.
double loss_value(const Model& model, const LinearSeq& seq,
                  const StepTargets& targets, uint64_t dropout_seed);

}  // namespace rine
