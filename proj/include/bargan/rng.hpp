#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bargan {

// Deterministic random source. Every draw goes through the raw mt19937_64
// stream (no std distributions), so sequences are reproducible across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform integer in [0, n)
  std::uint32_t below(std::uint32_t n) {
    const std::uint64_t all = ~std::uint64_t{0};
    const std::uint64_t limit = all - (all % n);
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return static_cast<std::uint32_t>(v % n);
  }

  // uniform double in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0); }

  // standard normal, Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // normal clipped to two sigmas by resampling
  float truncated_normal(float sigma) {
    double x = normal();
    while (std::fabs(x) > 2.0) x = normal();
    return static_cast<float>(x) * sigma;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(static_cast<std::uint32_t>(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bargan
