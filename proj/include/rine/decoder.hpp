#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rine/scorer.hpp"

namespace rine {

struct DecodeConfig {
  size_t max_steps = 0;           // scorer-call budget; 0 picks 4n + 8
  bool constrain_to_valid = true;
  bool record_trace = false;
};

// One scorer call. Non-EoP entries carry the applied insertion, so replaying
// them through apply() from the bare utterance rebuilds the prediction.
struct TraceEntry {
  bool eop = false;
  InsertionStep step;      // meaningful when !eop
  double label_logprob = 0.0;
  double start_logprob = 0.0;  // argmax point log-probs for EoP entries
  double end_logprob = 0.0;
  size_t seq_len_before = 0;
};

struct DecodeResult {
  ParseTree tree;
  LinearSeq final_seq;
  std::vector<TraceEntry> trace;  // one entry per scorer call if recorded
  size_t scorer_calls = 0;
  bool cap_hit = false;  // ran out of budget or room and was cut short
};

// Unconstrained failures keep the sequence built so far, so callers can
// still report what the model emitted.
class DecodeError : public Error {
 public:
  DecodeError(ErrorKind kind, const std::string& msg, std::string partial)
      : Error(kind, msg), partial_(std::move(partial)) {}
  const std::string& partial() const { return partial_; }

 private:
  std::string partial_;
};

// Greedy insertion decoding of one utterance. Constrained mode only applies
// balance-preserving insertions and always returns a tree valid under the
// profile, completing the root if the budget runs out first. Unconstrained
// mode follows raw argmaxes and throws InvalidInsertion (or a parse error)
// when they break.
DecodeResult decode(const Scorer& scorer, const std::vector<std::string>& tokens,
                    TaskProfile profile, const DecodeConfig& cfg = {});

struct SentenceResult {
  std::optional<ParseTree> tree;  // empty when decode failed
  std::string raw;                // linearized output text
  std::vector<TraceEntry> trace;
  size_t scorer_calls = 0;
  bool cap_hit = false;
  std::string error;  // failure description, empty on success
};

struct CorpusDecodeReport {
  size_t sentences = 0;
  size_t failures = 0;
  double mean_steps = 0.0;  // scorer calls per decoded sentence
  double elapsed_seconds = 0.0;
  double sentences_per_second = 0.0;
};

struct CorpusDecodeResult {
  std::vector<SentenceResult> sentences;
  CorpusDecodeReport report;
};

// Order-preserving corpus decode; per-sentence failures are captured, not
// thrown. Results do not depend on the worker count.
CorpusDecodeResult decode_corpus(const Scorer& scorer,
                                 const std::vector<std::vector<std::string>>& corpus,
                                 TaskProfile profile, const DecodeConfig& cfg,
                                 unsigned workers = 1);

}  // namespace rine
