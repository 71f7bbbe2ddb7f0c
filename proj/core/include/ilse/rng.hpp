#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ilse {

// Named sub-streams derived from one root seed. Each component draws from its
// own stream so that e.g. changing the dropout rate never perturbs the
// parameter initialization.
enum class Stream : std::uint64_t {
  kInit = 1,
  kDropout = 2,
  kSampling = 3,
  kAssignment = 4,
  kShuffle = 5,
  kData = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// mt19937_64 with platform-independent conversions. The <random>
// distributions are implementation-defined, so uniform and normal draws are
// computed here from raw 64-bit outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root_seed, Stream stream, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ilse
