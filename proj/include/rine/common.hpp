#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rine {

enum class ErrorKind {
  UnbalancedBrackets,
  MismatchedCloseLabel,
  EmptyNonTerminal,
  RootNotIntent,
  ProfileViolation,
  BadLabel,
  IndexOutOfRange,
  CrossingSpan,
  PartialMismatch,
  SequenceTooLong,
  NonFiniteActivation,
  NonFiniteLoss,
  TokenMismatch,
  LengthMismatch,
  LeafMismatch,
  SpecInconsistent,
  InvalidInsertion,
  BadConfig,
  BadRecord,
  IoError,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + msg),
        kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Deterministic RNG. Wraps mt19937_64 but does its own bounded-int,
// uniform-double and gaussian draws so that streams do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // integer in [lo, hi] inclusive
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // uniform double in [0, 1)
  double uniform() { return (next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, one value per call (no cached spare, keeps replay simple)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Runs fn(i) for i in [0, n). With workers <= 1 runs inline; otherwise
// splits [0, n) into `workers` contiguous chunks, one thread each.
// Results written to disjoint slots stay deterministic either way.
inline void parallel_for(size_t n, unsigned workers,
                         const std::function<void(size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned w = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  pool.reserve(w);
  size_t chunk = (n + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    size_t lo = t * chunk;
    size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace rine
