#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rine/corpus.hpp"
#include "rine/tree.hpp"

namespace rine {

// True iff the trees canonicalize to the same serialization. Both sides must
// share profile-independent leaf tokens; differing leaves are a usage error.
bool exact_match(const ParseTree& pred, const ParseTree& gold);

struct SpanPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when nothing was predicted
  bool recall_defined = true;     // false when the gold has no spans
  size_t true_positives = 0;
  size_t predicted = 0;
  size_t gold = 0;
};

// Micro-averaged labeled-span precision/recall/F1 over aligned corpora.
SpanPrf span_prf(const std::vector<ParseTree>& preds,
                 const std::vector<ParseTree>& golds);

// Fraction of raw linearized strings that parse under the profile; empty
// input has no rate.
std::optional<double> validity_rate(const std::vector<std::string>& raws,
                                    TaskProfile profile);

struct StepCountStats {
  double rine_steps = 0.0;     // mean insertions + EoP per tree
  double seq2seq_steps = 0.0;  // mean linearized length + stop symbol
  double ratio = 0.0;          // seq2seq over rine
};

StepCountStats step_count_comparison(const std::vector<ParseTree>& golds);

// One prediction as read back from a decode output file. `tree` is empty for
// sentences that failed to decode or produced an unparseable sequence; `raw`
// always carries the emitted linearization.
struct PredRecord {
  std::vector<std::string> tokens;
  std::optional<ParseTree> tree;
  std::string raw;
};

struct PredReadResult {
  std::vector<PredRecord> records;
  std::vector<LineError> errors;
};

PredReadResult read_predictions(const std::string& path, TaskProfile profile);

struct EvalReport {
  size_t sentences = 0;
  double exact_match = 0.0;
  std::optional<double> validity_rate;
  std::optional<double> em_flat;       // buckets keyed by the gold tree
  std::optional<double> em_composite;
  size_t n_flat = 0;
  size_t n_composite = 0;
  SpanPrf spans;
  std::optional<double> mean_decode_steps;      // filled by decode reports
  std::optional<double> sentences_per_second;   // filled by bench

  std::string to_json() const;
  std::string to_text() const;
};

// Scores aligned predictions against gold trees. Throws LengthMismatch on
// ragged input and TokenMismatch when a pair disagrees on its utterance.
EvalReport evaluate(const std::vector<PredRecord>& preds,
                    const std::vector<ParseTree>& golds);

}  // namespace rine
