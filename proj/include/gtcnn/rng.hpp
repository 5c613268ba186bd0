#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gtcnn/errors.hpp"

namespace gtcnn {

/// Seeded random generator threaded by value through every randomized
/// operation. Distributions are implemented inline (not via <random>
/// distribution objects) so that a given seed produces the same stream on
/// every platform and standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
  /// draw unbiased.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ParameterError("uniform_int: empty range");
    const std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  /// Standard normal via Box-Muller. One fresh pair of uniforms per draw.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const int j = uniform_int(0, static_cast<int>(i) - 1);
      std::swap(v[i - 1], v[static_cast<std::size_t>(j)]);
    }
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace gtcnn
