#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgad {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad thresholds, ratios, grids, dims. Maps to CLI exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or insufficient input data.
struct DataError : Error {
  using Error::Error;
};

// Caller broke a precondition (id out of range, mismatched vocabularies).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Warnings
// ---------------------------------------------------------------------------

namespace log {

using Sink = std::function<void(std::string_view)>;

inline Sink& sink() {
  static Sink s = [](std::string_view msg) { std::clog << "warning: " << msg << '\n'; };
  return s;
}

inline void set_sink(Sink s) { sink() = std::move(s); }

inline void warn(std::string_view msg) {
  if (sink()) sink()(msg);
}

// Silences warnings for the lifetime of the guard.
class ScopedSink {
 public:
  explicit ScopedSink(Sink s) : prev_(std::exchange(sink(), std::move(s))) {}
  ~ScopedSink() { sink() = std::move(prev_); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink prev_;
};

}  // namespace log

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

// Lowercase, trim, collapse internal whitespace runs to a single space.
inline std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Randomness
//
// The engine is fully specified by the standard but the std distributions
// are not, so sampling on top of mt19937_64 is done by hand to keep outputs
// identical across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Uniform real in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool coin() { return (next() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child stream whose sequence depends only on (seed state, tag).
  Rng fork(std::uint64_t tag) { return Rng(next() ^ (tag * 0xD1342543DE82EF95ULL)); }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used for provenance hashes.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace kgad
