#include "rine/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace rine {
namespace {

bool parses(const LinearSeq& seq, TaskProfile profile) {
  try {
    from_linear(seq, profile);
    return true;
  } catch (const Error&) {
    return false;
  }
}

size_t argmax(const std::vector<double>& v) {
  return static_cast<size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

// Best non-EoP label the profile can use mid-decode; the NER profile never
// inserts intents. Returns -1 when no label qualifies.
int best_label(const std::vector<double>& lp, const Vocab& vocab,
               TaskProfile profile) {
  int best = -1;
  for (int id = 0; id < static_cast<int>(lp.size()); id++) {
    if (id == vocab.eop_id()) continue;
    if (profile == TaskProfile::NestedNER &&
        vocab.label_at(static_cast<size_t>(id)).kind != LabelKind::Slot)
      continue;
    if (best < 0 || lp[static_cast<size_t>(id)] > lp[static_cast<size_t>(best)])
      best = id;
  }
  return best;
}

int best_intent(const std::vector<double>& lp, const Vocab& vocab) {
  int best = -1;
  for (int id = 0; id < static_cast<int>(lp.size()); id++) {
    if (id == vocab.eop_id() ||
        vocab.label_at(static_cast<size_t>(id)).kind != LabelKind::Intent)
      continue;
    if (best < 0 || lp[static_cast<size_t>(id)] > lp[static_cast<size_t>(best)])
      best = id;
  }
  if (best < 0)
    throw Error(ErrorKind::BadLabel,
                "no intent label available to complete the root");
  return best;
}

struct SpanPick {
  size_t i = 0, j = 0;
  double score = 0.0;
};

// Argmax of start + end log-probability over the balance-preserving spans,
// skipping the one wrap that would duplicate an identical enclosing pair.
SpanPick pick_span(const LinearSeq& seq, const Label& label,
                   const ScorerOutput& out) {
  SpanPick best;
  bool have = false;
  for (auto [i, j] : valid_spans(seq)) {
    if (i > 0 && j < seq.size() && seq[i - 1].kind == SeqElem::Kind::Open &&
        seq[i - 1].label == label && seq[j].kind == SeqElem::Kind::Close &&
        seq[j].label == label)
      continue;
    double score = out.start_logprobs[i] + out.end_logprobs[j];
    if (!have || score > best.score) {
      best = {i, j, score};
      have = true;
    }
  }
  if (!have)  // cannot happen: the full span is never skipped
    throw Error(ErrorKind::InvalidInsertion, "no insertable span remains");
  return best;
}

}  // namespace

DecodeResult decode(const Scorer& scorer, const std::vector<std::string>& tokens,
                    TaskProfile profile, const DecodeConfig& cfg) {
  if (tokens.empty())
    throw Error(ErrorKind::BadRecord, "cannot decode an empty utterance");
  LinearSeq seq;
  seq.reserve(tokens.size());
  for (const auto& t : tokens) seq.push_back(SeqElem::tok(t));
  if (seq.size() > scorer.max_input_len())
    throw Error(ErrorKind::SequenceTooLong,
                "utterance of " + std::to_string(seq.size()) +
                    " tokens exceeds the scorer limit of " +
                    std::to_string(scorer.max_input_len()));
  const size_t max_steps =
      cfg.max_steps > 0 ? cfg.max_steps : 4 * tokens.size() + 8;
  const Vocab& vocab = scorer.label_vocab();

  DecodeResult res;
  auto record = [&](bool eop, const InsertionStep& step, double lbl_lp,
                    double s_lp, double e_lp, size_t len) {
    if (!cfg.record_trace) return;
    res.trace.push_back(TraceEntry{eop, step, lbl_lp, s_lp, e_lp, len});
  };

  while (true) {
    ScorerOutput out = scorer.score(seq);
    res.scorer_calls++;
    const size_t m = seq.size();
    // last usable output: budget spent, or any insertion would overflow
    const bool last =
        res.scorer_calls >= max_steps || m + 2 > scorer.max_input_len();
    const size_t eop_id = static_cast<size_t>(vocab.eop_id());
    const double eop_lp = out.label_logprobs[eop_id];

    if (!cfg.constrain_to_valid) {
      size_t lbl = argmax(out.label_logprobs);
      if (lbl == eop_id) {
        record(true, InsertionStep{}, eop_lp,
               out.start_logprobs[argmax(out.start_logprobs)],
               out.end_logprobs[argmax(out.end_logprobs)], m);
        break;
      }
      size_t i = argmax(out.start_logprobs);
      size_t j = argmax(out.end_logprobs);
      if (i >= j || j > m || !span_is_well_nested(seq, i, j))
        throw DecodeError(ErrorKind::InvalidInsertion,
                          "predicted span (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") cannot be inserted",
                          seq_to_string(seq, TreeFormat::LabeledClose));
      InsertionStep step{vocab.label_at(lbl), i, j};
      record(false, step, out.label_logprobs[lbl], out.start_logprobs[i],
             out.end_logprobs[j], m);
      seq = rine::apply(seq, step);
      if (last) {
        res.cap_hit = true;
        break;
      }
      continue;
    }

    const int lbl = best_label(out.label_logprobs, vocab, profile);
    const bool eop_predicted =
        lbl < 0 || eop_lp > out.label_logprobs[static_cast<size_t>(lbl)];
    const bool valid_now = parses(seq, profile);

    if ((eop_predicted || last) && valid_now) {
      res.cap_hit = res.cap_hit || !eop_predicted;
      record(true, InsertionStep{}, eop_lp,
             out.start_logprobs[argmax(out.start_logprobs)],
             out.end_logprobs[argmax(out.end_logprobs)], m);
      break;
    }
    if (eop_predicted || last) {
      // EoP (or the cap) arrived on a rootless sequence: wrap it up
      int cid = best_intent(out.label_logprobs, vocab);
      InsertionStep step{vocab.label_at(static_cast<size_t>(cid)), 0, m};
      record(false, step, out.label_logprobs[static_cast<size_t>(cid)],
             out.start_logprobs[0], out.end_logprobs[m], m);
      seq = rine::apply(seq, step);
      if (!eop_predicted) res.cap_hit = true;
      if (last) break;
      continue;
    }

    // here !eop_predicted && !last: follow the predicted insertion
    const Label label = vocab.label_at(static_cast<size_t>(lbl));
    SpanPick pick = pick_span(seq, label, out);
    InsertionStep step{label, pick.i, pick.j};
    record(false, step, out.label_logprobs[static_cast<size_t>(lbl)],
           out.start_logprobs[pick.i], out.end_logprobs[pick.j], m);
    seq = rine::apply(seq, step);
  }

  try {
    res.tree = from_linear(seq, profile);
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(error_kind_name(e.kind())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw DecodeError(e.kind(), msg,
                      seq_to_string(seq, TreeFormat::LabeledClose));
  }
  res.final_seq = std::move(seq);
  return res;
}

CorpusDecodeResult decode_corpus(
    const Scorer& scorer, const std::vector<std::vector<std::string>>& corpus,
    TaskProfile profile, const DecodeConfig& cfg, unsigned workers) {
  CorpusDecodeResult res;
  res.sentences.resize(corpus.size());
  auto t0 = std::chrono::steady_clock::now();
  parallel_for(corpus.size(), workers, [&](size_t k) {
    SentenceResult& sr = res.sentences[k];
    try {
      DecodeResult d = decode(scorer, corpus[k], profile, cfg);
      sr.tree = std::move(d.tree);
      sr.raw = seq_to_string(d.final_seq, TreeFormat::LabeledClose);
      sr.trace = std::move(d.trace);
      sr.scorer_calls = d.scorer_calls;
      sr.cap_hit = d.cap_hit;
    } catch (const DecodeError& e) {
      sr.error = e.what();
      sr.raw = e.partial();
    } catch (const std::exception& e) {
      sr.error = e.what();
    }
  });
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  CorpusDecodeReport& rep = res.report;
  rep.sentences = corpus.size();
  rep.elapsed_seconds = elapsed;
  size_t ok = 0;
  double steps = 0.0;
  for (const auto& sr : res.sentences) {
    if (!sr.error.empty()) {
      rep.failures++;
      continue;
    }
    ok++;
    steps += static_cast<double>(sr.scorer_calls);
  }
  rep.mean_steps = ok > 0 ? steps / static_cast<double>(ok) : 0.0;
  rep.sentences_per_second =
      elapsed > 0.0 ? static_cast<double>(corpus.size()) / elapsed : 0.0;
  return res;
}

}  // namespace rine
