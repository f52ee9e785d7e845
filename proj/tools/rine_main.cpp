#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rine/corpus.hpp"
#include "rine/decoder.hpp"
#include "rine/evaluation.hpp"
#include "rine/scorer.hpp"
#include "rine/training.hpp"

using namespace rine;
using nlohmann::json;

namespace {

Ordering ordering_from_flag(const std::string& s) {
  return s == "bottom-up" ? Ordering::BottomUp : Ordering::TopDown;
}

// Readers collect per-line errors; the CLI treats any of them as fatal so
// that silently dropped records can never skew alignment-sensitive stages.
void fail_on_line_errors(const std::string& what,
                         const std::vector<LineError>& errs) {
  if (errs.empty()) return;
  std::string msg = what + " line " + std::to_string(errs[0].line) + ": " +
                    errs[0].message;
  if (errs.size() > 1)
    msg += " (and " + std::to_string(errs.size() - 1) + " more)";
  throw Error(ErrorKind::BadRecord, msg);
}

// .tsv files hold TOP-format exports, everything else is corpus JSONL.
std::vector<ParseTree> load_corpus(const std::string& path,
                                   TaskProfile profile) {
  CorpusReadResult got = path.size() > 4 && path.ends_with(".tsv")
                             ? read_top_tsv(path, profile)
                             : read_jsonl(path, profile);
  fail_on_line_errors(path, got.errors);
  return std::move(got.trees);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  return out;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct GenCorpusArgs {
  std::string spec, out;
  size_t n = 0;
  uint64_t seed = 1;
};

struct TrainArgs {
  std::string corpus, valid, config, ordering, out;
};

struct DecodeArgs {
  std::string ckpt, input, out;
  bool trace = false;
  bool unconstrained = false;
};

struct EvalArgs {
  std::string pred, gold, profile;
};

struct BenchArgs {
  std::string ckpt, input;
  unsigned workers = 1;
};

struct TraceArgs {
  std::string ckpt, utterance;
};

int run_gen_corpus(const GenCorpusArgs& a) {
  GrammarSpec spec = GrammarSpec::load_json_file(a.spec);
  spec.seed = a.seed;
  std::vector<ParseTree> trees = generate(spec, a.n);
  write_jsonl(a.out, trees);
  json rep;
  rep["out"] = a.out;
  rep["profile"] = profile_name(spec.profile);
  rep["written"] = trees.size();
  std::cout << rep.dump() << "\n";
  return 0;
}

// Train config file: {"encoder": {...}, "training": {...}, "profile": "top"},
// every key optional, anything else rejected.
int run_train(const TrainArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + a.config);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadConfig, a.config + ": " + e.what());
  }
  if (!j.is_object())
    throw Error(ErrorKind::BadConfig, a.config + ": expected an object");
  for (const auto& [key, val] : j.items())
    if (key != "encoder" && key != "training" && key != "profile")
      throw Error(ErrorKind::BadConfig, "unknown config key: " + key);

  EncoderConfig enc;
  if (j.contains("encoder")) enc = EncoderConfig::from_json(j["encoder"].dump());
  TrainConfig tc;
  if (j.contains("training")) tc = TrainConfig::from_json(j["training"].dump());
  TaskProfile profile = TaskProfile::TOP;
  if (j.contains("profile"))
    profile = profile_from_name(j["profile"].get<std::string>());

  std::vector<ParseTree> train_set = load_corpus(a.corpus, profile);
  std::vector<ParseTree> valid_set = load_corpus(a.valid, profile);

  TrainResult result =
      train(train_set, valid_set, enc, tc, ordering_from_flag(a.ordering));
  result.model.save(a.out);

  const std::string hist_path = a.out + ".history.jsonl";
  std::ofstream hist = open_out(hist_path);
  for (const auto& e : result.history) {
    json h;
    h["epoch"] = e.epoch;
    h["loss"] = e.loss;
    h["em"] = e.em;
    hist << h.dump() << "\n";
  }

  json rep;
  rep["checkpoint"] = a.out;
  rep["history"] = hist_path;
  rep["epochs"] = result.history.size();
  rep["best_epoch"] = result.best_epoch;
  rep["best_em"] = result.best_em;
  std::cout << rep.dump() << "\n";
  return 0;
}

// One record per applied insertion, partial sequence first, so that the file
// replays through apply() from the bare utterance to the exact prediction.
void write_trace_steps(std::ostream& os, const std::vector<std::string>& tokens,
                       const std::vector<TraceEntry>& trace) {
  LinearSeq seq;
  for (const auto& t : tokens) seq.push_back(SeqElem::tok(t));
  for (const auto& e : trace) {
    if (e.eop) continue;
    json j;
    j["seq"] = seq_to_string(seq, TreeFormat::LabeledClose);
    j["label"] = e.step.label.name;
    j["i"] = e.step.i;
    j["j"] = e.step.j;
    os << j.dump() << "\n";
    seq = rine::apply(seq, e.step);
  }
}

int run_decode(const DecodeArgs& a) {
  Model model = Model::load(a.ckpt);
  EncoderScorer scorer(model);
  UtteranceReadResult input = read_utterances_jsonl(a.input);
  fail_on_line_errors(a.input, input.errors);

  DecodeConfig cfg;
  cfg.constrain_to_valid = !a.unconstrained;
  cfg.record_trace = a.trace;
  CorpusDecodeResult res =
      decode_corpus(scorer, input.utterances, model.profile, cfg);

  std::ofstream out = open_out(a.out);
  for (size_t k = 0; k < res.sentences.size(); k++) {
    const SentenceResult& s = res.sentences[k];
    json j;
    j["tokens"] = input.utterances[k];
    if (s.tree.has_value()) {
      j["tree"] = serialize(*s.tree, TreeFormat::LabeledClose);
    } else {
      j["raw"] = s.raw;
      j["error"] = s.error;
    }
    out << j.dump() << "\n";
  }

  if (a.trace) {
    std::ofstream tr = open_out(a.out + ".trace.jsonl");
    for (size_t k = 0; k < res.sentences.size(); k++)
      write_trace_steps(tr, input.utterances[k], res.sentences[k].trace);
  }

  json rep;
  rep["out"] = a.out;
  rep["sentences"] = res.report.sentences;
  rep["failures"] = res.report.failures;
  rep["mean_steps"] = res.report.mean_steps;
  rep["elapsed_seconds"] = res.report.elapsed_seconds;
  rep["sentences_per_second"] = res.report.sentences_per_second;
  std::cout << rep.dump() << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  TaskProfile profile = profile_from_name(a.profile);
  PredReadResult preds = read_predictions(a.pred, profile);
  fail_on_line_errors(a.pred, preds.errors);
  std::vector<ParseTree> golds = load_corpus(a.gold, profile);

  EvalReport rep = evaluate(preds.records, golds);
  std::cout << rep.to_json() << "\n";
  std::cerr << rep.to_text();
  return 0;
}

int run_bench(const BenchArgs& a) {
  Model model = Model::load(a.ckpt);
  EncoderScorer scorer(model);
  UtteranceReadResult input = read_utterances_jsonl(a.input);
  fail_on_line_errors(a.input, input.errors);

  CorpusDecodeResult res = decode_corpus(scorer, input.utterances,
                                         model.profile, {}, a.workers);
  std::vector<ParseTree> predicted;
  for (const auto& s : res.sentences)
    if (s.tree.has_value()) predicted.push_back(*s.tree);
  StepCountStats steps = step_count_comparison(predicted);

  json rep;
  rep["sentences"] = res.report.sentences;
  rep["failures"] = res.report.failures;
  rep["workers"] = a.workers;
  rep["elapsed_seconds"] = res.report.elapsed_seconds;
  rep["sentences_per_second"] = res.report.sentences_per_second;
  rep["mean_decode_steps"] = res.report.mean_steps;
  rep["step_counts"] = {{"rine", steps.rine_steps},
                        {"seq2seq", steps.seq2seq_steps},
                        {"ratio", steps.ratio}};
  std::cout << rep.dump(2) << "\n";
  return 0;
}

int run_trace(const TraceArgs& a) {
  Model model = Model::load(a.ckpt);
  EncoderScorer scorer(model);
  std::vector<std::string> tokens = split_ws(a.utterance);

  DecodeConfig cfg;
  cfg.record_trace = true;
  DecodeResult res = decode(scorer, tokens, model.profile, cfg);

  LinearSeq seq;
  for (const auto& t : tokens) seq.push_back(SeqElem::tok(t));
  char buf[160];
  for (size_t k = 0; k < res.trace.size(); k++) {
    const TraceEntry& e = res.trace[k];
    std::printf("step %-2zu | %s\n", k + 1,
                seq_to_string(seq, TreeFormat::LabeledClose).c_str());
    if (e.eop) {
      std::snprintf(buf, sizeof(buf), "        | stop  (logprob %.4f)\n",
                    e.label_logprob);
    } else {
      std::snprintf(buf, sizeof(buf),
                    "        | insert %s over [%zu, %zu)  "
                    "(label %.4f, start %.4f, end %.4f)\n",
                    e.step.label.name.c_str(), e.step.i, e.step.j,
                    e.label_logprob, e.start_logprob, e.end_logprob);
      seq = rine::apply(seq, e.step);
    }
    std::fputs(buf, stdout);
  }
  std::printf("parse   | %s\n",
              serialize(res.tree, TreeFormat::LabeledClose).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recursive insertion parser"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  CLI::App* c_gen = app.add_subcommand("gen-corpus", "sample a synthetic corpus");
  c_gen->add_option("--spec", gen.spec, "grammar spec JSON")->required();
  c_gen->add_option("--n", gen.n, "number of trees")->required();
  c_gen->add_option("--out", gen.out, "output corpus JSONL")->required();
  c_gen->add_option("--seed", gen.seed, "generator seed")->required();

  TrainArgs tr;
  CLI::App* c_train = app.add_subcommand("train", "train an encoder");
  c_train->add_option("--corpus", tr.corpus, "training corpus")->required();
  c_train->add_option("--valid", tr.valid, "validation corpus")->required();
  c_train->add_option("--config", tr.config, "config JSON")->required();
  c_train->add_option("--ordering", tr.ordering, "decomposition ordering")
      ->required()
      ->check(CLI::IsMember({"top-down", "bottom-up"}));
  c_train->add_option("--out", tr.out, "checkpoint path")->required();

  DecodeArgs de;
  CLI::App* c_dec = app.add_subcommand("decode", "parse utterances");
  c_dec->add_option("--ckpt", de.ckpt, "checkpoint path")->required();
  c_dec->add_option("--input", de.input, "utterance JSONL")->required();
  c_dec->add_option("--out", de.out, "predictions JSONL")->required();
  c_dec->add_flag("--trace", de.trace, "also write OUT.trace.jsonl");
  c_dec->add_flag("--unconstrained", de.unconstrained,
                  "follow raw argmaxes without validity constraints");

  EvalArgs ev;
  CLI::App* c_eval = app.add_subcommand("eval", "score predictions");
  c_eval->add_option("--pred", ev.pred, "predictions JSONL")->required();
  c_eval->add_option("--gold", ev.gold, "gold corpus")->required();
  c_eval->add_option("--profile", ev.profile, "task profile")
      ->required()
      ->check(CLI::IsMember({"top", "ner"}));

  BenchArgs be;
  CLI::App* c_bench = app.add_subcommand("bench", "measure decode throughput");
  c_bench->add_option("--ckpt", be.ckpt, "checkpoint path")->required();
  c_bench->add_option("--input", be.input, "utterance JSONL")->required();
  c_bench->add_option("--workers", be.workers, "decode threads")->required();

  TraceArgs tc;
  CLI::App* c_trace = app.add_subcommand("trace", "walk through one parse");
  c_trace->add_option("--ckpt", tc.ckpt, "checkpoint path")->required();
  c_trace->add_option("--utterance", tc.utterance, "utterance text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    json err;
    err["error"] = "BadConfig";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }

  try {
    if (*c_gen) return run_gen_corpus(gen);
    if (*c_train) return run_train(tr);
    if (*c_dec) return run_decode(de);
    if (*c_eval) return run_eval(ev);
    if (*c_bench) return run_bench(be);
    if (*c_trace) return run_trace(tc);
  } catch (const Error& e) {
    json err;
    err["error"] = error_kind_name(e.kind());
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = "Internal";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
