#include "rine/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rine {
namespace {

using nlohmann::json;

void require_aligned(size_t preds, size_t golds) {
  if (preds != golds)
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(preds) + " predictions against " +
                    std::to_string(golds) + " gold trees");
}

void require_same_tokens(const std::vector<std::string>& pred,
                         const std::vector<std::string>& gold, size_t index) {
  if (pred != gold)
    throw Error(ErrorKind::TokenMismatch,
                "utterance " + std::to_string(index) +
                    " differs between prediction and gold");
}

json opt_json(const std::optional<double>& v) {
  if (!v.has_value()) return nullptr;
  return *v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

bool exact_match(const ParseTree& pred, const ParseTree& gold) {
  require_same_tokens(pred.leaves(), gold.leaves(), 0);
  if (pred.profile != gold.profile) return false;
  return serialize(pred, TreeFormat::LabeledClose) ==
         serialize(gold, TreeFormat::LabeledClose);
}

SpanPrf span_prf(const std::vector<ParseTree>& preds,
                 const std::vector<ParseTree>& golds) {
  require_aligned(preds.size(), golds.size());
  SpanPrf out;
  for (size_t k = 0; k < preds.size(); k++) {
    require_same_tokens(preds[k].leaves(), golds[k].leaves(), k);
    std::set<LabeledSpan> p = spans(preds[k]);
    std::set<LabeledSpan> g = spans(golds[k]);
    out.predicted += p.size();
    out.gold += g.size();
    for (const auto& s : p) out.true_positives += g.count(s);
  }
  out.precision_defined = out.predicted > 0;
  out.recall_defined = out.gold > 0;
  const double tp = static_cast<double>(out.true_positives);
  out.precision =
      out.precision_defined ? tp / static_cast<double>(out.predicted) : 0.0;
  out.recall = out.recall_defined ? tp / static_cast<double>(out.gold) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

std::optional<double> validity_rate(const std::vector<std::string>& raws,
                                    TaskProfile profile) {
  if (raws.empty()) return std::nullopt;
  size_t ok = 0;
  for (const auto& raw : raws) {
    try {
      parse_linearized(raw, TreeFormat::LabeledClose, profile);
      ok++;
    } catch (const Error&) {
    }
  }
  return static_cast<double>(ok) / static_cast<double>(raws.size());
}

StepCountStats step_count_comparison(const std::vector<ParseTree>& golds) {
  StepCountStats out;
  if (golds.empty()) return out;
  for (const auto& t : golds) {
    out.rine_steps += static_cast<double>(t.non_terminal_count() + 1);
    out.seq2seq_steps += static_cast<double>(to_linear(t).size() + 1);
  }
  out.rine_steps /= static_cast<double>(golds.size());
  out.seq2seq_steps /= static_cast<double>(golds.size());
  out.ratio = out.rine_steps > 0.0 ? out.seq2seq_steps / out.rine_steps : 0.0;
  return out;
}

PredReadResult read_predictions(const std::string& path, TaskProfile profile) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  PredReadResult result;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      PredRecord rec;
      rec.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (j.contains("tree")) {
        rec.tree = parse_linearized(j.at("tree").get<std::string>(),
                                    TreeFormat::LabeledClose, profile);
        if (rec.tree->leaves() != rec.tokens)
          throw Error(ErrorKind::TokenMismatch,
                      "tree leaves disagree with tokens");
        rec.raw = serialize(*rec.tree, TreeFormat::LabeledClose);
      } else if (j.contains("raw")) {
        rec.raw = j.at("raw").get<std::string>();
      } else {
        throw Error(ErrorKind::BadRecord, "neither tree nor raw present");
      }
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      result.errors.push_back(LineError{lineno, e.what()});
    }
  }
  return result;
}

std::string EvalReport::to_json() const {
  json j;
  j["sentences"] = sentences;
  j["exact_match"] = exact_match;
  j["validity_rate"] = opt_json(validity_rate);
  j["em_flat"] = opt_json(em_flat);
  j["em_composite"] = opt_json(em_composite);
  j["n_flat"] = n_flat;
  j["n_composite"] = n_composite;
  j["span_precision"] = spans.precision;
  j["span_recall"] = spans.recall;
  j["span_f1"] = spans.f1;
  j["span_precision_defined"] = spans.precision_defined;
  j["span_recall_defined"] = spans.recall_defined;
  j["span_true_positives"] = spans.true_positives;
  j["span_predicted"] = spans.predicted;
  j["span_gold"] = spans.gold;
  j["mean_decode_steps"] = opt_json(mean_decode_steps);
  j["sentences_per_second"] = opt_json(sentences_per_second);
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  auto row = [&](const char* name, const std::string& value) {
    out << name;
    for (size_t k = std::string(name).size(); k < 22; k++) out << ' ';
    out << value << "\n";
  };
  auto opt_row = [&](const char* name, const std::optional<double>& v) {
    row(name, v.has_value() ? fmt(*v) : "-");
  };
  row("sentences", std::to_string(sentences));
  row("exact_match", fmt(exact_match));
  opt_row("validity_rate", validity_rate);
  opt_row("em_flat", em_flat);
  opt_row("em_composite", em_composite);
  row("n_flat", std::to_string(n_flat));
  row("n_composite", std::to_string(n_composite));
  row("span_precision",
      fmt(spans.precision) + (spans.precision_defined ? "" : " (undefined)"));
  row("span_recall",
      fmt(spans.recall) + (spans.recall_defined ? "" : " (undefined)"));
  row("span_f1", fmt(spans.f1));
  opt_row("mean_decode_steps", mean_decode_steps);
  opt_row("sentences_per_second", sentences_per_second);
  return out.str();
}

EvalReport evaluate(const std::vector<PredRecord>& preds,
                    const std::vector<ParseTree>& golds) {
  require_aligned(preds.size(), golds.size());
  EvalReport rep;
  rep.sentences = golds.size();

  size_t hits = 0, flat_hits = 0, comp_hits = 0;
  std::vector<std::string> raws;
  raws.reserve(preds.size());
  for (size_t k = 0; k < golds.size(); k++) {
    const ParseTree& gold = golds[k];
    const PredRecord& pred = preds[k];
    require_same_tokens(pred.tokens, gold.leaves(), k);
    raws.push_back(pred.raw);

    const bool hit = pred.tree.has_value() && exact_match(*pred.tree, gold);
    const bool flat = is_flat(gold);
    hits += hit;
    if (flat) {
      rep.n_flat++;
      flat_hits += hit;
    } else {
      rep.n_composite++;
      comp_hits += hit;
    }

    std::set<LabeledSpan> g = spans(gold);
    rep.spans.gold += g.size();
    if (pred.tree.has_value()) {
      std::set<LabeledSpan> p = spans(*pred.tree);
      rep.spans.predicted += p.size();
      for (const auto& s : p) rep.spans.true_positives += g.count(s);
    }
  }

  if (rep.sentences > 0)
    rep.exact_match =
        static_cast<double>(hits) / static_cast<double>(rep.sentences);
  if (rep.n_flat > 0)
    rep.em_flat =
        static_cast<double>(flat_hits) / static_cast<double>(rep.n_flat);
  if (rep.n_composite > 0)
    rep.em_composite =
        static_cast<double>(comp_hits) / static_cast<double>(rep.n_composite);

  SpanPrf& s = rep.spans;
  s.precision_defined = s.predicted > 0;
  s.recall_defined = s.gold > 0;
  const double tp = static_cast<double>(s.true_positives);
  s.precision =
      s.precision_defined ? tp / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.recall_defined ? tp / static_cast<double>(s.gold) : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;

  if (!golds.empty())
    rep.validity_rate = validity_rate(raws, golds[0].profile);
  return rep;
}

}  // namespace rine
