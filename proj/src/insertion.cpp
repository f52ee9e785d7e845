#include "rine/insertion.hpp"

#include <algorithm>

namespace rine {

bool span_is_well_nested(const LinearSeq& seq, size_t i, size_t j) {
  if (i >= j || j > seq.size()) return false;
  long depth = 0;
  for (size_t k = i; k < j; ++k) {
    if (seq[k].kind == SeqElem::Kind::Open) ++depth;
    else if (seq[k].kind == SeqElem::Kind::Close) {
      if (--depth < 0) return false;  // closes something opened outside
    }
  }
  return depth == 0;
}

LinearSeq apply(const LinearSeq& seq, const InsertionStep& step) {
  if (step.i >= step.j || step.j > seq.size())
    throw Error(ErrorKind::IndexOutOfRange,
                "step (" + step.label.name + ", " + std::to_string(step.i) +
                    ", " + std::to_string(step.j) + ") on sequence of length " +
                    std::to_string(seq.size()));
  if (!span_is_well_nested(seq, step.i, step.j))
    throw Error(ErrorKind::CrossingSpan,
                "span [" + std::to_string(step.i) + ", " +
                    std::to_string(step.j) + ") crosses a bracket");
  LinearSeq out;
  out.reserve(seq.size() + 2);
  out.insert(out.end(), seq.begin(), seq.begin() + step.i);
  out.push_back(SeqElem::open(step.label));
  out.insert(out.end(), seq.begin() + step.i, seq.begin() + step.j);
  out.push_back(SeqElem::close(step.label));
  out.insert(out.end(), seq.begin() + step.j, seq.end());
  return out;
}

std::vector<std::pair<size_t, size_t>> valid_spans(const LinearSeq& seq) {
  std::vector<std::pair<size_t, size_t>> out;
  const size_t n = seq.size();
  for (size_t i = 0; i < n; ++i) {
    long depth = 0;
    for (size_t j = i + 1; j <= n; ++j) {
      // incremental balance of slice [i, j)
      if (seq[j - 1].kind == SeqElem::Kind::Open) ++depth;
      else if (seq[j - 1].kind == SeqElem::Kind::Close) --depth;
      if (depth < 0) break;  // slice closed an outside bracket; longer slices too
      if (depth == 0) out.emplace_back(i, j);
    }
  }
  return out;
}

namespace {

struct NodeRef {
  const TreeNode* node;
  size_t depth;
  size_t leftmost;   // first dominated token position
  size_t open_pos;   // position of Open in the full linearization
  size_t close_pos;  // position of Close in the full linearization
};

// Walks the tree in emission order, recording for every real non-terminal
// where its brackets land in the full linearized sequence.
void index_nodes(const TreeNode& n, size_t depth, size_t& tok_pos,
                 size_t& lin_pos, std::vector<NodeRef>& out) {
  if (n.leaf) {
    ++tok_pos;
    ++lin_pos;
    return;
  }
  bool real = n.label.kind != LabelKind::Root;
  size_t self = out.size();
  if (real) {
    out.push_back(NodeRef{&n, depth, tok_pos, lin_pos, 0});
    ++lin_pos;
  }
  size_t child_depth = real ? depth + 1 : depth;
  for (const auto& c : n.children) index_nodes(c, child_depth, tok_pos, lin_pos, out);
  if (real) {
    out[self].close_pos = lin_pos;
    ++lin_pos;
  }
}

}  // namespace

std::vector<DecompositionStep> decompose(const ParseTree& tree,
                                         Ordering ordering) {
  LinearSeq full = to_linear(tree);
  std::vector<NodeRef> nodes;
  size_t tok_pos = 0, lin_pos = 0;
  index_nodes(tree.root, 0, tok_pos, lin_pos, nodes);

  std::vector<size_t> order(nodes.size());
  for (size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& na = nodes[a];
    const auto& nb = nodes[b];
    if (na.depth != nb.depth)
      return ordering == Ordering::TopDown ? na.depth < nb.depth
                                           : na.depth > nb.depth;
    return na.leftmost < nb.leftmost;
  });

  // present[k] marks elements of the full linearization already inserted
  std::vector<char> present(full.size(), 0);
  for (size_t k = 0; k < full.size(); ++k)
    present[k] = full[k].kind == SeqElem::Kind::Tok;

  std::vector<DecompositionStep> out;
  out.reserve(order.size());
  for (size_t idx : order) {
    const auto& nr = nodes[idx];
    LinearSeq partial;
    partial.reserve(full.size());
    size_t i = 0, j = 0;
    for (size_t k = 0; k < full.size(); ++k) {
      if (k == nr.open_pos) i = partial.size();
      if (k == nr.close_pos) j = partial.size();
      if (present[k]) partial.push_back(full[k]);
    }
    out.push_back(DecompositionStep{
        std::move(partial), InsertionStep{nr.node->label, i, j}});
    present[nr.open_pos] = 1;
    present[nr.close_pos] = 1;
  }
  return out;
}

ParseTree reconstruct(const std::vector<std::string>& tokens,
                      const std::vector<InsertionStep>& steps,
                      TaskProfile profile) {
  LinearSeq seq;
  seq.reserve(tokens.size() + 2 * steps.size());
  for (const auto& t : tokens) seq.push_back(SeqElem::tok(t));
  for (size_t k = 0; k < steps.size(); ++k) {
    try {
      seq = rine::apply(seq, steps[k]);
    } catch (const Error& e) {
      throw Error(e.kind(), "step " + std::to_string(k) + ": " + e.what());
    }
  }
  return from_linear(seq, profile);
}

}  // namespace rine
