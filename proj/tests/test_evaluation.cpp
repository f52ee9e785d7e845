#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "json.hpp"
#include "rine/corpus.hpp"
#include "rine/evaluation.hpp"

using namespace rine;

namespace {

const char* kDirections =
    "[IN:GET_DIRECTIONS what is the shortest way [SL:DESTINATION "
    "[IN:GET_LOCATION_HOME home IN:GET_LOCATION_HOME] SL:DESTINATION] ? "
    "IN:GET_DIRECTIONS]";

ParseTree top(const std::string& text) {
  return parse_linearized(text, TreeFormat::LabeledClose, TaskProfile::TOP);
}

ParseTree ner(const std::string& text) {
  return parse_linearized(text, TreeFormat::LabeledClose,
                          TaskProfile::NestedNER);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

// Independent span collector used to cross-check spans()-based scoring.
void collect(const TreeNode& node, size_t offset, size_t* width,
             std::vector<LabeledSpan>* out) {
  if (node.leaf) {
    *width = 1;
    return;
  }
  size_t total = 0;
  for (const auto& ch : node.children) {
    size_t w = 0;
    collect(ch, offset + total, &w, out);
    total += w;
  }
  *width = total;
  if (node.label.kind != LabelKind::Root)
    out->push_back({node.label, offset, offset + total});
}

SpanPrf brute_force(const std::vector<ParseTree>& preds,
                    const std::vector<ParseTree>& golds) {
  SpanPrf out;
  for (size_t k = 0; k < preds.size(); k++) {
    std::vector<LabeledSpan> p, g;
    size_t w = 0;
    collect(preds[k].root, 0, &w, &p);
    collect(golds[k].root, 0, &w, &g);
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<LabeledSpan> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(both));
    out.true_positives += both.size();
    out.predicted += p.size();
    out.gold += g.size();
  }
  out.precision_defined = out.predicted > 0;
  out.recall_defined = out.gold > 0;
  double tp = double(out.true_positives);
  out.precision = out.precision_defined ? tp / double(out.predicted) : 0.0;
  out.recall = out.recall_defined ? tp / double(out.gold) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// Root intent over the same leaves, all structure below dropped.
ParseTree flatten(const ParseTree& t) {
  std::vector<TreeNode> leaves;
  for (const auto& tok : t.leaves()) leaves.push_back(TreeNode::make_leaf(tok));
  ParseTree out;
  out.profile = t.profile;
  Label root = t.profile == TaskProfile::TOP ? t.root.label
                                             : Label::virtual_root();
  out.root = TreeNode::make_node(root, std::move(leaves));
  return out;
}

PredRecord as_pred(const ParseTree& t) {
  PredRecord rec;
  rec.tokens = t.leaves();
  rec.tree = t;
  rec.raw = serialize(t, TreeFormat::LabeledClose);
  return rec;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("exact match compares canonical serializations") {
  ParseTree gold = top(kDirections);
  CHECK(exact_match(gold, gold));
  CHECK(exact_match(top(kDirections), gold));

  ParseTree flat = flatten(gold);
  CHECK_FALSE(exact_match(flat, gold));
  CHECK(exact_match(flat, flat));

  ParseTree relabeled = gold;
  relabeled.root.label = Label::intent("IN:GET_ESTIMATED_DURATION");
  CHECK_FALSE(exact_match(relabeled, gold));

  ParseTree other = top("[IN:GET_DIRECTIONS drive home IN:GET_DIRECTIONS]");
  CHECK(kind_of([&] { exact_match(other, gold); }) ==
        ErrorKind::TokenMismatch);
}

TEST_CASE("exact match distinguishes profiles over equal structure") {
  ParseTree t = ner("[SL:PERSON smith SL:PERSON] called");
  ParseTree u = t;
  CHECK(exact_match(t, u));
  u.profile = TaskProfile::TOP;
  CHECK_FALSE(exact_match(t, u));
}

TEST_CASE("span prf on hand fixtures") {
  ParseTree gold = top("[IN:A w1 [SL:B w2 SL:B] IN:A]");

  SUBCASE("identical trees") {
    SpanPrf s = span_prf({gold}, {gold});
    CHECK(s.true_positives == 2);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }
  SUBCASE("missing slot halves recall") {
    SpanPrf s = span_prf({flatten(gold)}, {gold});
    CHECK(s.true_positives == 1);
    CHECK(s.predicted == 1);
    CHECK(s.gold == 2);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("extra slot halves precision") {
    SpanPrf s = span_prf({gold}, {flatten(gold)});
    CHECK(s.precision == 0.5);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("same span different label is a miss") {
    ParseTree pred = top("[IN:A w1 [SL:C w2 SL:C] IN:A]");
    SpanPrf s = span_prf({pred}, {gold});
    CHECK(s.true_positives == 1);
    CHECK(s.precision == 0.5);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == 0.5);
  }
  SUBCASE("micro average accumulates before dividing") {
    SpanPrf s = span_prf({flatten(gold), gold}, {gold, gold});
    CHECK(s.true_positives == 3);
    CHECK(s.predicted == 3);
    CHECK(s.gold == 4);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 0.75);
  }
}

TEST_CASE("span prf undefined sides come from empty ner span sets") {
  ParseTree empty = ner("smith called");
  ParseTree tagged = ner("[SL:PERSON smith SL:PERSON] called");

  SpanPrf s = span_prf({empty}, {empty});
  CHECK_FALSE(s.precision_defined);
  CHECK_FALSE(s.recall_defined);
  CHECK(s.f1 == 0.0);

  s = span_prf({empty}, {tagged});
  CHECK_FALSE(s.precision_defined);
  CHECK(s.recall_defined);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);

  s = span_prf({tagged}, {empty});
  CHECK(s.precision_defined);
  CHECK_FALSE(s.recall_defined);
  CHECK(s.precision == 0.0);
  CHECK(s.f1 == 0.0);
}

TEST_CASE("span prf matches brute force set intersection") {
  GrammarSpec spec = GrammarSpec::default_top();
  spec.seed = 31;
  spec.nesting_prob = 0.5;
  std::vector<ParseTree> golds = generate(spec, 60);
  std::vector<ParseTree> preds;
  for (size_t k = 0; k < golds.size(); k++)
    preds.push_back(k % 3 == 0 ? golds[k] : flatten(golds[k]));

  SpanPrf got = span_prf(preds, golds);
  SpanPrf want = brute_force(preds, golds);
  CHECK(got.true_positives == want.true_positives);
  CHECK(got.predicted == want.predicted);
  CHECK(got.gold == want.gold);
  CHECK(got.precision == want.precision);
  CHECK(got.recall == want.recall);
  CHECK(got.f1 == want.f1);
}

TEST_CASE("span prf input guards") {
  ParseTree g = top("[IN:A w1 IN:A]");
  CHECK(kind_of([&] { span_prf({g, g}, {g}); }) == ErrorKind::LengthMismatch);
  ParseTree other = top("[IN:A w2 IN:A]");
  CHECK(kind_of([&] { span_prf({other}, {g}); }) == ErrorKind::TokenMismatch);
}

TEST_CASE("validity rate counts parses under the profile") {
  std::vector<std::string> raws = {
      "[IN:A w1 IN:A]",                 // valid TOP
      "[IN:A w1 [SL:B w2 SL:B] IN:A]",  // valid TOP
      "[SL:B w1 SL:B]",                 // no intent root
      "[IN:A w1",                       // unbalanced
      "w1 w2",                          // bare tokens
  };
  auto rate = validity_rate(raws, TaskProfile::TOP);
  REQUIRE(rate.has_value());
  CHECK(*rate == doctest::Approx(0.4).epsilon(1e-12));

  // Under nested NER the slot-only and bare-token strings are the valid ones.
  rate = validity_rate(raws, TaskProfile::NestedNER);
  REQUIRE(rate.has_value());
  CHECK(*rate == doctest::Approx(0.4).epsilon(1e-12));

  CHECK_FALSE(validity_rate({}, TaskProfile::TOP).has_value());
}

TEST_CASE("step count comparison on the worked example") {
  ParseTree t = top(kDirections);
  StepCountStats s = step_count_comparison({t});
  CHECK(s.rine_steps == 4.0);
  CHECK(s.seq2seq_steps == 14.0);
  CHECK(s.ratio == 3.5);
}

TEST_CASE("step count comparison averages before taking the ratio") {
  ParseTree deep = top(kDirections);           // 4 vs 14
  ParseTree flat = top("[IN:A w1 w2 IN:A]");   // 2 vs 5
  StepCountStats s = step_count_comparison({deep, flat});
  CHECK(s.rine_steps == 3.0);
  CHECK(s.seq2seq_steps == 9.5);
  CHECK(s.ratio == doctest::Approx(9.5 / 3.0).epsilon(1e-12));

  StepCountStats none = step_count_comparison({});
  CHECK(none.rine_steps == 0.0);
  CHECK(none.ratio == 0.0);
}

TEST_CASE("evaluate buckets by gold shape and recombines exactly") {
  // Flat allows slots of plain tokens; composite nests an intent in a slot.
  std::vector<ParseTree> golds = {
      top("[IN:A w1 w2 IN:A]"),                          // flat, hit
      top("[IN:A w3 IN:A]"),                             // flat, miss
      top("[IN:A w1 [SL:B w2 SL:B] IN:A]"),              // flat, hit
      top(kDirections),                                  // composite, hit
      top("[IN:B w4 [SL:B w5 SL:B] IN:B]"),              // flat, miss
      top("[IN:C w6 [SL:D [IN:E w7 IN:E] SL:D] IN:C]"),  // composite, miss
  };
  std::vector<PredRecord> preds = {
      as_pred(golds[0]),
      as_pred(top("[IN:B w3 IN:B]")),
      as_pred(golds[2]),
      as_pred(golds[3]),
      as_pred(flatten(golds[4])),
      as_pred(flatten(golds[5])),
  };

  EvalReport rep = evaluate(preds, golds);
  CHECK(rep.sentences == 6);
  CHECK(rep.exact_match == 0.5);
  CHECK(rep.n_flat == 4);
  CHECK(rep.n_composite == 2);
  REQUIRE(rep.em_flat.has_value());
  REQUIRE(rep.em_composite.has_value());
  CHECK(*rep.em_flat == 0.5);
  CHECK(*rep.em_composite == 0.5);

  // The bucket means recombine to the total without rounding error.
  double recombined = (*rep.em_flat * double(rep.n_flat) +
                       *rep.em_composite * double(rep.n_composite)) /
                      double(rep.sentences);
  CHECK(rep.exact_match == recombined);

  REQUIRE(rep.validity_rate.has_value());
  CHECK(*rep.validity_rate == 1.0);
  CHECK_FALSE(rep.mean_decode_steps.has_value());
  CHECK_FALSE(rep.sentences_per_second.has_value());

  // Span counts agree with scoring the parsed trees directly.
  std::vector<ParseTree> pred_trees;
  for (const auto& p : preds) pred_trees.push_back(*p.tree);
  SpanPrf direct = span_prf(pred_trees, golds);
  CHECK(rep.spans.true_positives == direct.true_positives);
  CHECK(rep.spans.predicted == direct.predicted);
  CHECK(rep.spans.gold == direct.gold);
  CHECK(rep.spans.f1 == direct.f1);
}

TEST_CASE("evaluate handles unparsed predictions and single bucket corpora") {
  std::vector<ParseTree> golds = {top("[IN:A w1 w2 IN:A]"),
                                  top("[IN:B w3 IN:B]")};
  PredRecord broken;
  broken.tokens = {"w1", "w2"};
  broken.raw = "[IN:A w1 w2";  // never parsed
  EvalReport rep = evaluate({broken, as_pred(golds[1])}, golds);
  CHECK(rep.exact_match == 0.5);
  REQUIRE(rep.em_flat.has_value());
  CHECK_FALSE(rep.em_composite.has_value());
  CHECK(rep.n_composite == 0);
  REQUIRE(rep.validity_rate.has_value());
  CHECK(*rep.validity_rate == 0.5);
  CHECK(rep.spans.predicted == 1);  // only the parsed record contributes
  CHECK(rep.spans.gold == 2);
}

TEST_CASE("evaluate input guards") {
  std::vector<ParseTree> golds = {top("[IN:A w1 IN:A]")};
  CHECK(kind_of([&] { evaluate({}, golds); }) == ErrorKind::LengthMismatch);
  PredRecord wrong = as_pred(top("[IN:A w2 IN:A]"));
  CHECK(kind_of([&] { evaluate({wrong}, golds); }) ==
        ErrorKind::TokenMismatch);
}

TEST_CASE("read predictions accepts tree and raw records") {
  TempFile f("rine_test_preds.jsonl");
  {
    std::ofstream out(f.path);
    out << R"({"tokens": ["w1", "w2"], "tree": "[IN:A w1 [SL:B w2 SL:B] IN:A]"})"
        << "\n";
    out << R"({"tokens": ["w3"], "raw": "[SL:B w3 SL:B]", "error": "RootNotIntent"})"
        << "\n";
    out << "\n";  // blank lines are skipped
    out << R"({"tokens": ["w4"]})" << "\n";  // no payload
    out << R"({"tokens": ["w5"], "tree": "[IN:A w9 IN:A]"})"
        << "\n";  // leaves disagree with tokens
    out << "not json\n";
  }

  PredReadResult got = read_predictions(f.path, TaskProfile::TOP);
  REQUIRE(got.records.size() == 2);
  CHECK(got.records[0].tokens == std::vector<std::string>{"w1", "w2"});
  REQUIRE(got.records[0].tree.has_value());
  CHECK(got.records[0].raw == "[IN:A w1 [SL:B w2 SL:B] IN:A]");
  CHECK_FALSE(got.records[1].tree.has_value());
  CHECK(got.records[1].raw == "[SL:B w3 SL:B]");

  REQUIRE(got.errors.size() == 3);
  CHECK(got.errors[0].line == 4);
  CHECK(got.errors[1].line == 5);
  CHECK(got.errors[2].line == 6);

  CHECK(kind_of([&] { read_predictions("/nonexistent/preds.jsonl",
                                       TaskProfile::TOP); }) ==
        ErrorKind::IoError);
}

TEST_CASE("report serialization") {
  EvalReport rep;
  rep.sentences = 3;
  rep.exact_match = 2.0 / 3.0;
  rep.em_flat = 1.0;
  rep.n_flat = 1;
  rep.n_composite = 2;
  rep.spans.precision = 0.5;
  rep.spans.recall = 0.25;
  rep.spans.f1 = 1.0 / 3.0;
  rep.spans.true_positives = 1;
  rep.spans.predicted = 2;
  rep.spans.gold = 4;

  nlohmann::json j = nlohmann::json::parse(rep.to_json());
  CHECK(j["sentences"] == 3);
  CHECK(j["exact_match"].get<double>() == 2.0 / 3.0);
  CHECK(j["validity_rate"].is_null());
  CHECK(j["em_flat"].get<double>() == 1.0);
  CHECK(j["em_composite"].is_null());
  CHECK(j["span_f1"].get<double>() == 1.0 / 3.0);
  CHECK(j["mean_decode_steps"].is_null());

  std::string text = rep.to_text();
  CHECK(text.find("exact_match") != std::string::npos);
  CHECK(text.find("0.6667") != std::string::npos);
  CHECK(text.find("validity_rate         -") != std::string::npos);
  CHECK(text.find("em_composite          -") != std::string::npos);
}
