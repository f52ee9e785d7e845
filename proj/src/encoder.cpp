#include "rine/encoder.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace rine {
namespace {

using nlohmann::json;

constexpr double kLnEps = 1e-5;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
  double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
  return cdf + x * pdf;
}

Mat gelu_mat(const Mat& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

Mat gelu_grad_mat(const Mat& x) {
  return x.unaryExpr([](double v) { return gelu_grad(v); });
}

struct LnCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

Mat ln_forward(const Mat& x, const Mat& g, const Mat& b, LnCache& c) {
  const long rows = x.rows(), cols = x.cols();
  c.xhat.resize(rows, cols);
  c.inv_std.resize(rows);
  Mat y(rows, cols);
  for (long r = 0; r < rows; r++) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + kLnEps);
    c.inv_std(r) = inv;
    c.xhat.row(r) = (x.row(r).array() - mu) * inv;
    y.row(r) =
        c.xhat.row(r).cwiseProduct(g.row(0)) + b.row(0);
  }
  return y;
}

Mat ln_backward(const Mat& dy, const Mat& g, const LnCache& c, Mat& dg,
                Mat& db) {
  const long rows = dy.rows(), cols = dy.cols();
  Mat dx(rows, cols);
  for (long r = 0; r < rows; r++) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(g.row(0));
    double m1 = dxhat.mean();
    double m2 = dxhat.cwiseProduct(c.xhat.row(r)).mean() ;
    dx.row(r) =
        (dxhat.array() - m1 - c.xhat.row(r).array() * m2) * c.inv_std(r);
    dg.row(0) += dy.row(r).cwiseProduct(c.xhat.row(r));
    db.row(0) += dy.row(r);
  }
  return dx;
}

// inverted-scale dropout mask; draws row-major so streams are reproducible
Mat make_mask(Rng& rng, long rows, long cols, double p) {
  Mat m(rows, cols);
  double scale = 1.0 / (1.0 - p);
  for (long r = 0; r < rows; r++)
    for (long c = 0; c < cols; c++)
      m(r, c) = rng.uniform() >= p ? scale : 0.0;
  return m;
}

void softmax_rows(Mat& s) {
  for (long r = 0; r < s.rows(); r++) {
    double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct LayerCache {
  Mat x_in;
  LnCache ln1c;
  Mat h1, q, k, v;
  std::vector<Mat> p;      // softmax probs per head
  std::vector<Mat> pd;     // probs after attention dropout
  std::vector<Mat> amask;  // empty when attention dropout is off
  Mat oconcat, a, mask1, xmid;
  LnCache ln2c;
  Mat h2, f1, g1, f2, mask2;
};

struct Cache {
  std::vector<int> ids;
  Mat mask_emb;
  std::vector<LayerCache> layers;
  Mat x;  // final residual stream
  LnCache lnfc;
  Mat y;
  Mat hz1, ha1, hlogits;
  std::vector<double> label_logprobs;
  std::vector<double> start_logprobs;  // folded over insertion points
  std::vector<double> end_logprobs;
  bool dropped = false;   // residual/embedding dropout active
  bool adropped = false;  // attention dropout active
};

// folds the BOS-query attention logits of one head into log-probs over the
// m + 1 insertion points: point 0 merges the BOS and first-element columns,
// point k >= 1 is column k + 1
std::vector<double> fold_row(const Eigen::RowVectorXd& s0) {
  const long m_plus_2 = s0.size();
  double mx = s0.maxCoeff();
  double lse = std::log((s0.array() - mx).exp().sum()) + mx;
  std::vector<double> out(static_cast<size_t>(m_plus_2 - 1));
  double a = s0(0) - lse, b = s0(1) - lse;
  double hi = std::max(a, b);
  out[0] = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  for (long k = 1; k + 1 < m_plus_2; k++) out[k] = s0(k + 1) - lse;
  return out;
}

Cache forward(const Model& model, const LinearSeq& seq, bool train,
              uint64_t dropout_seed) {
  const EncoderConfig& cfg = model.config;
  const ParamSet& P = model.params;
  Cache c;
  c.ids = model.vocab.encode(seq);
  const long M = static_cast<long>(c.ids.size());
  if (M > cfg.max_len)
    throw Error(ErrorKind::SequenceTooLong,
                "input of " + std::to_string(M) + " rows exceeds max_len " +
                    std::to_string(cfg.max_len));
  const long d = cfg.d_model, H = cfg.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.dropped = train && cfg.dropout > 0.0;
  c.adropped = train && cfg.attn_dropout > 0.0;
  Rng rng(dropout_seed);

  Mat x(M, d);
  for (long r = 0; r < M; r++)
    x.row(r) = P.tok_emb.row(c.ids[r]) + P.pos_emb.row(r);
  if (c.dropped) {
    c.mask_emb = make_mask(rng, M, d, cfg.dropout);
    x = x.cwiseProduct(c.mask_emb);
  }

  Eigen::RowVectorXd s0_start, s0_end;
  c.layers.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; l++) {
    LayerCache& lc = c.layers[l];
    const LayerParams& L = P.layers[l];
    lc.x_in = std::move(x);
    lc.h1 = ln_forward(lc.x_in, L.ln1_g, L.ln1_b, lc.ln1c);
    lc.q = (lc.h1 * L.wq).rowwise() + L.bq.row(0);
    lc.k = (lc.h1 * L.wk).rowwise() + L.bk.row(0);
    lc.v = (lc.h1 * L.wv).rowwise() + L.bv.row(0);
    lc.p.resize(H);
    lc.pd.resize(H);
    if (c.adropped) lc.amask.resize(H);
    lc.oconcat.resize(M, d);
    for (long h = 0; h < H; h++) {
      Mat s = lc.q.middleCols(h * dh, dh) *
              lc.k.middleCols(h * dh, dh).transpose() * scale;
      if (l + 1 == cfg.n_layers) {
        if (h == cfg.start_head) s0_start = s.row(0);
        if (h == cfg.end_head) s0_end = s.row(0);
      }
      softmax_rows(s);
      lc.p[h] = std::move(s);
      if (c.adropped) {
        lc.amask[h] = make_mask(rng, M, M, cfg.attn_dropout);
        lc.pd[h] = lc.p[h].cwiseProduct(lc.amask[h]);
      } else {
        lc.pd[h] = lc.p[h];
      }
      lc.oconcat.middleCols(h * dh, dh) =
          lc.pd[h] * lc.v.middleCols(h * dh, dh);
    }
    lc.a = (lc.oconcat * L.wo).rowwise() + L.bo.row(0);
    if (c.dropped) {
      lc.mask1 = make_mask(rng, M, d, cfg.dropout);
      lc.xmid = lc.x_in + lc.a.cwiseProduct(lc.mask1);
    } else {
      lc.xmid = lc.x_in + lc.a;
    }
    lc.h2 = ln_forward(lc.xmid, L.ln2_g, L.ln2_b, lc.ln2c);
    lc.f1 = (lc.h2 * L.w1).rowwise() + L.b1.row(0);
    lc.g1 = gelu_mat(lc.f1);
    lc.f2 = (lc.g1 * L.w2).rowwise() + L.b2.row(0);
    if (c.dropped) {
      lc.mask2 = make_mask(rng, M, d, cfg.dropout);
      x = lc.xmid + lc.f2.cwiseProduct(lc.mask2);
    } else {
      x = lc.xmid + lc.f2;
    }
  }
  c.x = std::move(x);
  c.y = ln_forward(c.x, P.lnf_g, P.lnf_b, c.lnfc);

  c.hz1 = c.y.row(0) * P.head_w1 + P.head_b1;
  c.ha1 = gelu_mat(c.hz1);
  c.hlogits = c.ha1 * P.head_w2 + P.head_b2;
  double mx = c.hlogits.maxCoeff();
  double lse = std::log((c.hlogits.array() - mx).exp().sum()) + mx;
  c.label_logprobs.resize(c.hlogits.cols());
  for (long i = 0; i < c.hlogits.cols(); i++)
    c.label_logprobs[i] = c.hlogits(0, i) - lse;

  c.start_logprobs = fold_row(s0_start);
  c.end_logprobs = fold_row(s0_end);
  return c;
}

double loss_from_cache(const Cache& c, const StepTargets& t) {
  if (t.label_id < 0 ||
      t.label_id >= static_cast<int>(c.label_logprobs.size()))
    throw Error(ErrorKind::IndexOutOfRange, "label target out of range");
  double loss = -c.label_logprobs[t.label_id];
  if (t.has_position) {
    if (t.start >= c.start_logprobs.size() || t.end >= c.end_logprobs.size())
      throw Error(ErrorKind::IndexOutOfRange, "position target out of range");
    loss += -c.start_logprobs[t.start] - c.end_logprobs[t.end];
  }
  if (!std::isfinite(loss))
    throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");
  return loss;
}

// stable extra attention-logit gradient for the folded position loss:
// d(-log q_gold)/ds_q = p_q - p_q [q in gold group] / q_gold
void add_position_grad(Mat& ds, const Mat& p, size_t gold) {
  const long cols = p.cols();
  double qg = gold == 0 ? p(0, 0) + p(0, 1) : p(0, gold + 1);
  if (!(qg > 0.0))
    throw Error(ErrorKind::NonFiniteLoss, "folded position probability is 0");
  for (long q = 0; q < cols; q++) {
    bool in_group = gold == 0 ? q <= 1 : q == static_cast<long>(gold) + 1;
    ds(0, q) += p(0, q) - (in_group ? p(0, q) / qg : 0.0);
  }
}

double backward(const Model& model, const Cache& c, const StepTargets& t,
                ParamSet& g) {
  const EncoderConfig& cfg = model.config;
  const ParamSet& P = model.params;
  const long M = static_cast<long>(c.ids.size());
  const long d = cfg.d_model, H = cfg.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  double loss = loss_from_cache(c, t);

  // label head
  Mat dlogits(1, c.hlogits.cols());
  for (long i = 0; i < dlogits.cols(); i++)
    dlogits(0, i) = std::exp(c.label_logprobs[i]);
  dlogits(0, t.label_id) -= 1.0;
  g.head_w2 += c.ha1.transpose() * dlogits;
  g.head_b2 += dlogits;
  Mat da1 = dlogits * P.head_w2.transpose();
  Mat dz1 = da1.cwiseProduct(gelu_grad_mat(c.hz1));
  g.head_w1 += c.y.row(0).transpose() * dz1;
  g.head_b1 += dz1;
  Mat dy = Mat::Zero(M, d);
  dy.row(0) = dz1 * P.head_w1.transpose();

  Mat dx = ln_backward(dy, P.lnf_g, c.lnfc, g.lnf_g, g.lnf_b);

  for (int l = cfg.n_layers - 1; l >= 0; l--) {
    const LayerCache& lc = c.layers[l];
    const LayerParams& L = P.layers[l];
    LayerParams& gl = g.layers[l];

    // feed-forward block
    Mat df2 = c.dropped ? dx.cwiseProduct(lc.mask2).eval() : dx;
    gl.w2 += lc.g1.transpose() * df2;
    gl.b2 += df2.colwise().sum();
    Mat dg1 = df2 * L.w2.transpose();
    Mat df1 = dg1.cwiseProduct(gelu_grad_mat(lc.f1));
    gl.w1 += lc.h2.transpose() * df1;
    gl.b1 += df1.colwise().sum();
    Mat dh2 = df1 * L.w1.transpose();
    Mat dxmid = dx + ln_backward(dh2, L.ln2_g, lc.ln2c, gl.ln2_g, gl.ln2_b);

    // attention block
    Mat da = c.dropped ? dxmid.cwiseProduct(lc.mask1).eval() : dxmid;
    gl.wo += lc.oconcat.transpose() * da;
    gl.bo += da.colwise().sum();
    Mat doconcat = da * L.wo.transpose();
    Mat dq(M, d), dk(M, d), dv(M, d);
    for (long h = 0; h < H; h++) {
      auto dOh = doconcat.middleCols(h * dh, dh);
      auto Vh = lc.v.middleCols(h * dh, dh);
      Mat dpd = dOh * Vh.transpose();
      dv.middleCols(h * dh, dh) = lc.pd[h].transpose() * dOh;
      Mat dp = c.adropped ? dpd.cwiseProduct(lc.amask[h]).eval()
                          : std::move(dpd);
      Mat ds(M, M);
      for (long r = 0; r < M; r++) {
        double dot = dp.row(r).dot(lc.p[h].row(r));
        ds.row(r) = lc.p[h].row(r).array() * (dp.row(r).array() - dot);
      }
      if (l + 1 == cfg.n_layers && t.has_position) {
        if (h == cfg.start_head) add_position_grad(ds, lc.p[h], t.start);
        if (h == cfg.end_head) add_position_grad(ds, lc.p[h], t.end);
      }
      ds *= scale;
      dq.middleCols(h * dh, dh) = ds * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * lc.q.middleCols(h * dh, dh);
    }
    gl.wq += lc.h1.transpose() * dq;
    gl.bq += dq.colwise().sum();
    gl.wk += lc.h1.transpose() * dk;
    gl.bk += dk.colwise().sum();
    gl.wv += lc.h1.transpose() * dv;
    gl.bv += dv.colwise().sum();
    Mat dh1 = dq * L.wq.transpose() + dk * L.wk.transpose() +
              dv * L.wv.transpose();
    dx = dxmid + ln_backward(dh1, L.ln1_g, lc.ln1c, gl.ln1_g, gl.ln1_b);
  }

  Mat dx0 = c.dropped ? dx.cwiseProduct(c.mask_emb).eval() : std::move(dx);
  for (long r = 0; r < M; r++) {
    g.tok_emb.row(c.ids[r]) += dx0.row(r);
    g.pos_emb.row(r) += dx0.row(r);
  }
  return loss;
}

json mat_to_json(const std::string& name, const Mat& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (long r = 0; r < m.rows(); r++)
    for (long c = 0; c < m.cols(); c++) data.push_back(m(r, c));
  return json{{"name", name},
              {"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::move(data)}};
}

}  // namespace

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::BadConfig, msg);
  };
  if (d_model <= 0 || n_layers <= 0 || d_ff <= 0 || label_head_hidden <= 0)
    fail("model dimensions must be positive");
  if (n_heads < 3) fail("n_heads must be at least 3");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (start_head == end_head) fail("start_head and end_head must differ");
  if (start_head < 0 || start_head >= n_heads || end_head < 0 ||
      end_head >= n_heads)
    fail("position heads must index into the last layer's heads");
  if (max_len < 4) fail("max_len must be at least 4");
  if (dropout < 0.0 || dropout >= 1.0 || attn_dropout < 0.0 ||
      attn_dropout >= 1.0)
    fail("dropout rates must lie in [0, 1)");
}

std::string EncoderConfig::to_json() const {
  json j;
  j["d_model"] = d_model;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["d_ff"] = d_ff;
  j["label_head_hidden"] = label_head_hidden;
  j["max_len"] = max_len;
  j["start_head"] = start_head;
  j["end_head"] = end_head;
  j["dropout"] = dropout;
  j["attn_dropout"] = attn_dropout;
  return j.dump(2);
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("config: ") + e.what());
  }
  EncoderConfig cfg;
  auto grab_int = [&](const char* key, int& out) {
    if (j.contains(key)) {
      out = j.at(key).get<int>();
      j.erase(key);
    }
  };
  auto grab_double = [&](const char* key, double& out) {
    if (j.contains(key)) {
      out = j.at(key).get<double>();
      j.erase(key);
    }
  };
  try {
    grab_int("d_model", cfg.d_model);
    grab_int("n_layers", cfg.n_layers);
    grab_int("n_heads", cfg.n_heads);
    grab_int("d_ff", cfg.d_ff);
    grab_int("label_head_hidden", cfg.label_head_hidden);
    grab_int("max_len", cfg.max_len);
    grab_int("start_head", cfg.start_head);
    grab_int("end_head", cfg.end_head);
    grab_double("dropout", cfg.dropout);
    grab_double("attn_dropout", cfg.attn_dropout);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("config: ") + e.what());
  }
  if (!j.empty())
    throw Error(ErrorKind::BadConfig,
                "unknown config key: " + j.begin().key());
  cfg.validate();
  return cfg;
}

ParamSet ParamSet::shaped(const EncoderConfig& cfg, size_t elem_vocab,
                          size_t label_vocab) {
  ParamSet p;
  const long d = cfg.d_model, f = cfg.d_ff, h = cfg.label_head_hidden;
  p.tok_emb = Mat::Zero(static_cast<long>(elem_vocab), d);
  p.pos_emb = Mat::Zero(cfg.max_len, d);
  p.layers.resize(cfg.n_layers);
  for (auto& L : p.layers) {
    L.ln1_g = Mat::Zero(1, d);
    L.ln1_b = Mat::Zero(1, d);
    L.wq = Mat::Zero(d, d);
    L.bq = Mat::Zero(1, d);
    L.wk = Mat::Zero(d, d);
    L.bk = Mat::Zero(1, d);
    L.wv = Mat::Zero(d, d);
    L.bv = Mat::Zero(1, d);
    L.wo = Mat::Zero(d, d);
    L.bo = Mat::Zero(1, d);
    L.ln2_g = Mat::Zero(1, d);
    L.ln2_b = Mat::Zero(1, d);
    L.w1 = Mat::Zero(d, f);
    L.b1 = Mat::Zero(1, f);
    L.w2 = Mat::Zero(f, d);
    L.b2 = Mat::Zero(1, d);
  }
  p.lnf_g = Mat::Zero(1, d);
  p.lnf_b = Mat::Zero(1, d);
  p.head_w1 = Mat::Zero(d, h);
  p.head_b1 = Mat::Zero(1, h);
  p.head_w2 = Mat::Zero(h, static_cast<long>(label_vocab));
  p.head_b2 = Mat::Zero(1, static_cast<long>(label_vocab));
  return p;
}

void ParamSet::init(uint64_t seed) {
  Rng rng(seed);
  auto randn = [&](Mat& m) {
    for (long r = 0; r < m.rows(); r++)
      for (long c = 0; c < m.cols(); c++) m(r, c) = 0.02 * rng.normal();
  };
  randn(tok_emb);
  randn(pos_emb);
  for (auto& L : layers) {
    L.ln1_g.setOnes();
    L.ln1_b.setZero();
    randn(L.wq);
    L.bq.setZero();
    randn(L.wk);
    L.bk.setZero();
    randn(L.wv);
    L.bv.setZero();
    randn(L.wo);
    L.bo.setZero();
    L.ln2_g.setOnes();
    L.ln2_b.setZero();
    randn(L.w1);
    L.b1.setZero();
    randn(L.w2);
    L.b2.setZero();
  }
  lnf_g.setOnes();
  lnf_b.setZero();
  randn(head_w1);
  head_b1.setZero();
  randn(head_w2);
  head_b2.setZero();
}

void ParamSet::zero() {
  visit_params(*this, [](const std::string&, Mat& m) { m.setZero(); });
}

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  visit_params(*this, [&](const std::string&, const Mat& m) { n += m.size(); });
  return n;
}

Model Model::init(const EncoderConfig& cfg, Vocab vocab, TaskProfile profile,
                  uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.vocab = std::move(vocab);
  m.profile = profile;
  m.params = ParamSet::shaped(cfg, m.vocab.elem_vocab_size(),
                              m.vocab.label_vocab_size());
  m.params.init(seed);
  return m;
}

void Model::save(const std::string& path) const {
  json j;
  j["format"] = "rine-checkpoint";
  j["version"] = 1;
  j["profile"] = profile_name(profile);
  j["config"] = json::parse(config.to_json());
  j["vocab"] = {{"tokens", vocab.tokens()}, {"labels", vocab.label_names()}};
  json tensors = json::array();
  visit_params(params, [&](const std::string& name, const Mat& m) {
    tensors.push_back(mat_to_json(name, m));
  });
  j["params"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  out << j.dump();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadRecord, path + ": " + e.what());
  }
  try {
    if (j.at("format") != "rine-checkpoint" || j.at("version") != 1)
      throw Error(ErrorKind::BadRecord, "not a version 1 rine checkpoint");
    Model m;
    m.profile = profile_from_name(j.at("profile").get<std::string>());
    m.config = EncoderConfig::from_json(j.at("config").dump());
    m.vocab = Vocab::from_parts(
        j.at("vocab").at("tokens").get<std::vector<std::string>>(),
        j.at("vocab").at("labels").get<std::vector<std::string>>());
    m.params = ParamSet::shaped(m.config, m.vocab.elem_vocab_size(),
                                m.vocab.label_vocab_size());
    std::map<std::string, const json*> by_name;
    for (const auto& entry : j.at("params"))
      by_name[entry.at("name").get<std::string>()] = &entry;
    size_t used = 0;
    visit_params(m.params, [&](const std::string& name, Mat& mat) {
      auto it = by_name.find(name);
      if (it == by_name.end())
        throw Error(ErrorKind::BadRecord, "checkpoint misses tensor " + name);
      const json& entry = *it->second;
      long rows = entry.at("rows").get<long>();
      long cols = entry.at("cols").get<long>();
      if (rows != mat.rows() || cols != mat.cols())
        throw Error(ErrorKind::LengthMismatch,
                    "tensor " + name + " is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " +
                        std::to_string(mat.rows()) + "x" +
                        std::to_string(mat.cols()));
      const auto& data = entry.at("data");
      if (static_cast<long>(data.size()) != rows * cols)
        throw Error(ErrorKind::LengthMismatch,
                    "tensor " + name + " has wrong element count");
      size_t k = 0;
      for (long r = 0; r < rows; r++)
        for (long c = 0; c < cols; c++) mat(r, c) = data[k++].get<double>();
      used++;
    });
    if (used != by_name.size())
      throw Error(ErrorKind::BadRecord, "checkpoint has extra tensors");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadRecord, path + ": " + e.what());
  }
}

ScorerOutput encode(const Model& model, const LinearSeq& seq) {
  Cache c = forward(model, seq, false, 0);
  ScorerOutput out;
  out.label_logprobs = std::move(c.label_logprobs);
  out.start_logprobs = std::move(c.start_logprobs);
  out.end_logprobs = std::move(c.end_logprobs);
  for (const auto* v :
       {&out.label_logprobs, &out.start_logprobs, &out.end_logprobs})
    for (double lp : *v)
      if (std::isnan(lp) || lp > 1e-6)
        throw Error(ErrorKind::NonFiniteActivation,
                    "log-probability output is NaN or positive");
  return out;
}

double loss_and_grad(const Model& model, const LinearSeq& seq,
                     const StepTargets& targets, uint64_t dropout_seed,
                     ParamSet& grads) {
  Cache c = forward(model, seq, true, dropout_seed);
  return backward(model, c, targets, grads);
}

double loss_value(const Model& model, const LinearSeq& seq,
                  const StepTargets& targets, uint64_t dropout_seed) {
  Cache c = forward(model, seq, true, dropout_seed);
  return loss_from_cache(c, targets);
}

}  // namespace rine
