// Deterministic random numbers. std::normal_distribution and friends are
// implementation-defined, so the transforms live here: the same seed gives
// the same stream on every platform mt19937_64 runs on.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace icpd {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // in (0, 1), never exactly 0 or 1
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
  }

  // standard normal via Box-Muller; second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::size_t bounded(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = bounded(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // stable seed derivation for sub-streams (splitmix64 over a combined word)
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace icpd
