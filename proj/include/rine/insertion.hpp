#pragma once

#include <utility>
#include <vector>

#include "rine/tree.hpp"

namespace rine {

// One generation action: wrap elements [i, j) of the current linearized
// sequence in an Open(label)/Close(label) pair.
struct InsertionStep {
  Label label;
  size_t i = 0;  // start element index, inclusive
  size_t j = 0;  // end element index, exclusive

  bool operator==(const InsertionStep&) const = default;
};

enum class Ordering { TopDown, BottomUp };

// True iff wrapping [i, j) keeps the sequence balanced: the slice must
// itself be balanced (no Close for an outside Open, no Open closed outside).
bool span_is_well_nested(const LinearSeq& seq, size_t i, size_t j);

// seq[0:i) ++ Open ++ seq[i:j) ++ Close ++ seq[j:).  Grows length by 2.
LinearSeq apply(const LinearSeq& seq, const InsertionStep& step);

// All (i, j), 0 <= i < j <= len, whose wrap preserves balance.
std::vector<std::pair<size_t, size_t>> valid_spans(const LinearSeq& seq);

struct DecompositionStep {
  LinearSeq partial;   // sequence the step is applied to
  InsertionStep step;

  bool operator==(const DecompositionStep&) const = default;
};

// Splits a gold tree into its insertion sequence under the ordering:
// TopDown visits non-terminals by (depth asc, leftmost leaf asc),
// BottomUp by (depth desc, leftmost leaf asc). Root depth is 0.
std::vector<DecompositionStep> decompose(const ParseTree& tree,
                                         Ordering ordering);

// Applies the steps to the bare utterance and parses the result.
ParseTree reconstruct(const std::vector<std::string>& tokens,
                      const std::vector<InsertionStep>& steps,
                      TaskProfile profile);

}  // namespace rine
