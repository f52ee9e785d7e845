#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "rine/corpus.hpp"
#include "rine/training.hpp"

using namespace rine;

namespace {

const char* kDirections =
    "[IN:GET_DIRECTIONS what is the shortest way [SL:DESTINATION "
    "[IN:GET_LOCATION_HOME home IN:GET_LOCATION_HOME] SL:DESTINATION] ? "
    "IN:GET_DIRECTIONS]";

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

ParseTree fig_tree() {
  return parse_linearized(kDirections, TreeFormat::LabeledClose);
}

EncoderConfig tiny() {
  EncoderConfig cfg;
  cfg.d_model = 12;
  cfg.n_layers = 2;
  cfg.n_heads = 3;
  cfg.d_ff = 20;
  cfg.label_head_hidden = 10;
  cfg.max_len = 32;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("instances cover every step plus one EoP per tree") {
  GrammarSpec spec = GrammarSpec::default_top();
  spec.seed = 31;
  std::vector<ParseTree> corpus = generate(spec, 25);
  for (Ordering ord : {Ordering::TopDown, Ordering::BottomUp}) {
    std::vector<TrainInstance> instances = build_instances(corpus, ord);
    size_t expected = 0;
    for (const auto& t : corpus) expected += t.non_terminal_count() + 1;
    CHECK(instances.size() == expected);

    size_t at = 0;
    for (const auto& tree : corpus) {
      for (const auto& ds : decompose(tree, ord)) {
        CHECK(instances[at].input == ds.partial);
        CHECK(instances[at].gold_label == ds.step.label);
        CHECK(instances[at].has_position);
        CHECK(instances[at].gold_start == ds.step.i);
        CHECK(instances[at].gold_end == ds.step.j);
        at++;
      }
      CHECK(instances[at].input == to_linear(tree));
      CHECK(instances[at].gold_label == Label::eop());
      CHECK_FALSE(instances[at].has_position);
      at++;
    }
  }
}

TEST_CASE("uniform outputs price out in closed form") {
  Vocab vocab = Vocab::build({fig_tree()});
  const size_t V = vocab.label_vocab_size();
  const size_t m = 7;
  ScorerOutput out;
  out.label_logprobs.assign(V, -std::log(static_cast<double>(V)));
  out.start_logprobs.assign(m + 1, -std::log(static_cast<double>(m + 1)));
  out.end_logprobs = out.start_logprobs;

  TrainInstance step;
  step.gold_label = Label::intent("IN:GET_DIRECTIONS");
  step.has_position = true;
  step.gold_start = 0;
  step.gold_end = 7;
  CHECK(loss_from_output(out, step, vocab) ==
        doctest::Approx(std::log(4.0) + 2.0 * std::log(8.0)).epsilon(1e-12));

  TrainInstance eop;
  eop.gold_label = Label::eop();
  CHECK(loss_from_output(out, eop, vocab) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // the two-label toy: uniform over {label, EoP} prices EoP at ln 2
  ParseTree alpha = parse_linearized("[IN:ALPHA x IN:ALPHA]",
                                     TreeFormat::LabeledClose);
  Vocab tiny_vocab = Vocab::build({alpha});
  ScorerOutput two;
  two.label_logprobs.assign(2, -std::log(2.0));
  two.start_logprobs.assign(2, -std::log(2.0));
  two.end_logprobs = two.start_logprobs;
  TrainInstance stop;
  stop.gold_label = Label::eop();
  CHECK(loss_from_output(two, stop, tiny_vocab) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  TrainInstance outside;
  outside.gold_label = Label::eop();
  outside.has_position = true;
  outside.gold_start = 5;
  outside.gold_end = 5;
  CHECK(kind_of([&] { loss_from_output(two, outside, tiny_vocab); }) ==
        ErrorKind::IndexOutOfRange);
}

TEST_CASE("gold point masses cost nothing") {
  ParseTree gold = fig_tree();
  for (Ordering ord : {Ordering::TopDown, Ordering::BottomUp}) {
    OracleScorer oracle(gold, ord);
    std::vector<TrainInstance> instances = build_instances({gold}, ord);
    for (const auto& inst : instances)
      CHECK(loss_from_output(oracle.score(inst.input), inst,
                             oracle.label_vocab()) == 0.0);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Model model = Model::init(tiny(), Vocab::build({fig_tree()}),
                            TaskProfile::TOP, 17);
  std::vector<TrainInstance> instances =
      build_instances({fig_tree()}, Ordering::TopDown);
  REQUIRE(instances.size() == 4);

  // one positioned step and the EoP closer
  for (size_t pick : {size_t{1}, size_t{3}}) {
    double fine = grad_check(model, instances[pick], 1e-3, 200, 99);
    double coarse = grad_check(model, instances[pick], 1e-1, 200, 99);
    CHECK(fine < 1e-4);
    CHECK(coarse > fine);
  }
}

TEST_CASE("gradients stay correct under active dropout") {
  EncoderConfig cfg = tiny();
  cfg.dropout = 0.2;
  cfg.attn_dropout = 0.15;
  Model model = Model::init(cfg, Vocab::build({fig_tree()}),
                            TaskProfile::TOP, 23);
  std::vector<TrainInstance> instances =
      build_instances({fig_tree()}, Ordering::BottomUp);
  CHECK(grad_check(model, instances[0], 1e-3, 120, 7) < 1e-4);
}

TEST_CASE("the schedule warms up linearly then decays on a square root") {
  TrainConfig cfg;
  cfg.lr_peak = 6e-4;
  cfg.warmup_steps = 500;
  CHECK(lr_at(cfg, 1) == doctest::Approx(6e-4 / 500.0));
  CHECK(lr_at(cfg, 250) == doctest::Approx(3e-4));
  CHECK(lr_at(cfg, 500) == doctest::Approx(6e-4));
  CHECK(lr_at(cfg, 2000) == doctest::Approx(3e-4));  // sqrt(500/2000) = 1/2
  for (int64_t s : {2, 100, 499}) CHECK(lr_at(cfg, s) < lr_at(cfg, s + 1));
  for (int64_t s : {501, 1000, 5000}) CHECK(lr_at(cfg, s) > lr_at(cfg, s + 1));
  CHECK(kind_of([&] { lr_at(cfg, 0); }) == ErrorKind::IndexOutOfRange);
}

TEST_CASE("train config json round trip and validation") {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.batch_size = 4;
  cfg.lr_peak = 1e-3;
  cfg.warmup_steps = 60;
  cfg.seed = 99;
  cfg.early_stop_em = 0.5;
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.epochs == 7);
  CHECK(back.batch_size == 4);
  CHECK(back.lr_peak == 1e-3);
  CHECK(back.warmup_steps == 60);
  CHECK(back.seed == 99);
  CHECK(back.early_stop_em == 0.5);
  CHECK(back.beta2 == TrainConfig{}.beta2);

  CHECK(kind_of([] { TrainConfig::from_json("{\"epoch\": 3}"); }) ==
        ErrorKind::BadConfig);
  CHECK(kind_of([] { TrainConfig::from_json("{\"batch_size\": 0}"); }) ==
        ErrorKind::BadConfig);
  CHECK(kind_of([] { TrainConfig::from_json("{\"beta1\": 1.0}"); }) ==
        ErrorKind::BadConfig);
}

TEST_CASE("training is deterministic in the seed") {
  GrammarSpec spec = GrammarSpec::default_top();
  spec.seed = 41;
  std::vector<ParseTree> corpus = generate(spec, 24);
  std::vector<ParseTree> valid(corpus.begin(), corpus.begin() + 6);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.warmup_steps = 10;
  cfg.seed = 3;
  EncoderConfig enc = tiny();
  enc.max_len = 96;

  TrainResult a = train(corpus, valid, enc, cfg, Ordering::TopDown);
  TrainResult b = train(corpus, valid, enc, cfg, Ordering::TopDown);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t k = 0; k < a.history.size(); k++) {
    CHECK(a.history[k].loss == b.history[k].loss);
    CHECK(a.history[k].em == b.history[k].em);
  }
  bool same = true;
  visit_params(a.model.params, [&](const std::string& name, const Mat& m) {
    visit_params(b.model.params, [&](const std::string& n2, const Mat& m2) {
      if (name == n2 && m != m2) same = false;
    });
  });
  CHECK(same);

  cfg.seed = 4;
  TrainResult c = train(corpus, valid, enc, cfg, Ordering::TopDown);
  CHECK(a.history[0].loss != c.history[0].loss);
}

TEST_CASE("training memorizes a small corpus") {
  GrammarSpec spec = GrammarSpec::default_top();
  spec.seed = 8;
  std::vector<ParseTree> corpus = generate(spec, 12);
  EncoderConfig enc;
  enc.d_model = 32;
  enc.n_layers = 2;
  enc.n_heads = 4;
  enc.d_ff = 64;
  enc.label_head_hidden = 32;
  enc.max_len = 96;
  enc.dropout = 0.0;
  enc.attn_dropout = 0.0;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.lr_peak = 3e-3;
  cfg.warmup_steps = 60;
  cfg.weight_decay = 1e-5;
  cfg.seed = 1;

  TrainResult res = train(corpus, corpus, enc, cfg, Ordering::TopDown);
  CHECK(res.best_em >= 0.9);
  CHECK(res.best_epoch >= 1);
  CHECK(res.history.back().em == res.best_em);  // early stop on the peak
  CHECK(res.history.size() < 200);              // stopped before the cap
  CHECK(res.history.front().loss > res.history.back().loss);
}

TEST_CASE("a diverging run aborts with the offending batch") {
  GrammarSpec spec = GrammarSpec::default_top();
  spec.seed = 12;
  std::vector<ParseTree> corpus = generate(spec, 10);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.lr_peak = 1e18;
  cfg.warmup_steps = 1;
  EncoderConfig enc = tiny();
  enc.max_len = 96;
  try {
    train(corpus, {}, enc, cfg, Ordering::TopDown);
    FAIL("expected a NonFiniteLoss error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("training input guards") {
  EncoderConfig enc = tiny();
  TrainConfig cfg;
  CHECK(kind_of([&] { train({}, {}, enc, cfg, Ordering::TopDown); }) ==
        ErrorKind::BadRecord);

  ParseTree top = fig_tree();
  ParseTree ner = parse_linearized("[SL:ORG acme SL:ORG] called",
                                   TreeFormat::LabeledClose,
                                   TaskProfile::NestedNER);
  CHECK(kind_of([&] { train({top, ner}, {}, enc, cfg, Ordering::TopDown); }) ==
        ErrorKind::ProfileViolation);
  CHECK(kind_of([&] { train({top}, {ner}, enc, cfg, Ordering::TopDown); }) ==
        ErrorKind::ProfileViolation);

  EncoderConfig cramped = tiny();
  cramped.max_len = 8;
  CHECK(kind_of([&] { train({top}, {}, cramped, cfg, Ordering::TopDown); }) ==
        ErrorKind::SequenceTooLong);
}
