#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rine/insertion.hpp"
#include "rine/tree.hpp"

namespace rine {

// Seeded grammar for desk-scale corpora. Word pools are disjoint slices of
// `vocab`: each intent owns cue words, each slot owns content words, the
// remainder are filler words, so constituent boundaries stay learnable.
struct GrammarSpec {
  TaskProfile profile = TaskProfile::TOP;
  std::vector<std::string> intents;
  std::vector<std::string> slots;
  std::vector<std::string> vocab;
  std::map<std::string, std::vector<std::string>> intent_slots;  // slot menu per intent
  double nesting_prob = 0.35;
  int max_depth = 3;        // non-terminal nesting levels, root = 1
  int lead_tokens_min = 1;  // intent lead words
  int lead_tokens_max = 3;
  int slots_min = 1;        // slot children per intent / entities per sentence
  int slots_max = 3;
  int slot_tokens_min = 1;  // words inside a non-nested slot
  int slot_tokens_max = 3;
  int gap_tokens_min = 1;   // filler words between top-level constituents
  int gap_tokens_max = 2;
  uint64_t seed = 1;

  // word pools derived from `vocab`; filled by finalize()
  std::map<std::string, std::vector<std::string>> intent_cues;
  std::map<std::string, std::vector<std::string>> slot_words;
  std::vector<std::string> fillers;

  // Splits vocab into pools and checks consistency. Throws SpecInconsistent.
  void finalize();

  static GrammarSpec default_top();
  static GrammarSpec default_ner();

  static GrammarSpec load_json_file(const std::string& path);
  std::string to_json() const;
};

std::vector<ParseTree> generate(const GrammarSpec& spec, size_t n);

struct LineError {
  size_t line = 0;  // 1-based
  std::string message;
};

struct CorpusReadResult {
  std::vector<ParseTree> trees;
  std::vector<LineError> errors;
};

// JSONL: {"tokens": [...], "tree": "<LabeledClose>"} per line.
CorpusReadResult read_jsonl(const std::string& path,
                            TaskProfile profile = TaskProfile::TOP);
void write_jsonl(const std::string& path, const std::vector<ParseTree>& trees);

// TOP TSV: raw utterance <TAB> tokenized utterance <TAB> PlainClose tree.
CorpusReadResult read_top_tsv(const std::string& path,
                              TaskProfile profile = TaskProfile::TOP);

// Utterance-only JSONL reader for decode inputs: uses "tokens" when
// present, otherwise the leaves of "tree".
struct UtteranceReadResult {
  std::vector<std::vector<std::string>> utterances;
  std::vector<LineError> errors;
};
UtteranceReadResult read_utterances_jsonl(const std::string& path);

struct CorpusSplit {
  std::vector<ParseTree> train;
  std::vector<ParseTree> valid;
  std::vector<ParseTree> test;
};

// Seeded shuffle split; counts must not exceed the corpus size. The three
// parts are disjoint and, when counts sum to the corpus size, exhaustive.
CorpusSplit split_corpus(const std::vector<ParseTree>& trees, size_t n_train,
                         size_t n_valid, size_t n_test, uint64_t seed);

// Keeps a subset in which every intent/slot label of the subset appears in
// at least `per_label` trees when possible (samples-per-label style filter).
std::vector<ParseTree> subsample_per_label(const std::vector<ParseTree>& trees,
                                           size_t per_label, uint64_t seed);

// Writes decomposition pairs as JSONL {"partial","label","i","j"}.
void write_decomposition_jsonl(const std::string& path, const ParseTree& tree,
                               Ordering ordering);

}  // namespace rine
