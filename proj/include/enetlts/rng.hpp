// Deterministic random number generation with counter-based seed derivation.
//
// Every parallel task receives its own Rng built from derive_seed(master,
// {stage, index...}), so results never depend on thread scheduling. The
// samplers below avoid std::uniform_*_distribution on purpose: their output
// is implementation-defined, and we promise byte-identical runs.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace enetlts {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Hash-chains the master seed with a path of stage tags and task indexes.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = master;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t step : path) {
    state = out ^ (step + 0x632be59bd9b4e019ULL);
    out = splitmix64(state);
  }
  return out;
}

// Seed stage tags. Values are arbitrary but frozen: changing them changes
// every seeded result.
namespace seed_stage {
inline constexpr std::uint64_t kRandomStart = 1;
inline constexpr std::uint64_t kKeepConverge = 2;
inline constexpr std::uint64_t kGridCell = 3;
inline constexpr std::uint64_t kCvFolds = 4;
inline constexpr std::uint64_t kReweight = 5;
inline constexpr std::uint64_t kDiagnostics = 6;
inline constexpr std::uint64_t kStudyRep = 7;
inline constexpr std::uint64_t kClassicalCv = 8;
}  // namespace seed_stage

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_below(
                    static_cast<std::uint64_t>(hi_inclusive - lo) + 1));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    const double u = uniform_pos();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) *
           std::cos(2.0 * 3.14159265358979323846 * v);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from {0, ..., n-1}, in draw order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_below(static_cast<std::uint64_t>(n - i)));
      out.push_back(pool[j]);
      std::swap(pool[j], pool[static_cast<std::size_t>(n - i - 1)]);
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace enetlts
