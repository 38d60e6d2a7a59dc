#pragma once

// Splittable deterministic RNG: xoshiro256++ streams keyed by a splitmix64
// hash chain. Substreams derived from (seed, path...) are independent of
// each other and of evaluation order, so replications and per-source draws
// stay bitwise reproducible under any scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace hubertl {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // expand the seed into the xoshiro state via splitmix64
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      word = detail::mix64(s);
    }
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0) {
      state_[0] = 1;  // all-zero state is invalid for xoshiro
    }
  }

  // Hash-chain a derivation path onto a seed. Distinct paths give
  // statistically independent keys.
  static std::uint64_t derive_key(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::mix64(seed);
    for (std::uint64_t id : path) {
      h = detail::mix64(h ^ detail::mix64(id + 0x632be59bd9b4e019ULL));
    }
    return h;
  }

  static Rng from_path(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> path) {
    return Rng(derive_key(seed, path));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // uniform on [0,1) with 53 random bits
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via the Marsaglia polar method (pairs cached)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // standard Cauchy via inverse CDF
  double cauchy() {
    return std::tan(3.14159265358979323846 * (uniform01() - 0.5));
  }

  // +1 or -1 with equal probability
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x, r;
    do {
      x = next_u64();
      r = x % n;
    } while (x - r > static_cast<std::uint64_t>(-static_cast<std::int64_t>(n)));
    return r;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hubertl
