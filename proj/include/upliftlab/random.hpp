#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace upliftlab {

// Named substreams. Every random quantity in the library is drawn from a
// substream keyed by (seed, tag, index), so adding a column or a cell never
// perturbs the draws of another.
enum class StreamTag : std::uint64_t {
  kCovariate = 1,  // index = 0-based column
  kTreatment = 2,
  kLatentNoise = 3,
  kSplit = 4,
  kInit = 5,
  kShuffle = 6,
  kEvaluation = 7,
};

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0);

// mt19937_64 with library-defined distributions. The engine's output
// sequence is fixed by the C++ standard; the std:: distributions are not,
// so uniform/normal/bounded-integer transforms are implemented here to keep
// datasets bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0)
      : engine_(derive_seed(seed, tag, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Marsaglia polar method.
  double normal();

  int bernoulli_half() { return static_cast<int>(engine_() >> 63); }

  // Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace upliftlab
