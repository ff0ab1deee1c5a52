#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cssl/error.hpp"

namespace cssl {

// splitmix64 step; used to derive independent stream seeds from a base seed
// plus salts (sample id, epoch, view index, ...).
inline std::uint64_t mix_seed(std::uint64_t state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Deterministic RNG. All value mappings are implemented by hand so that the
// same seed yields bit-identical streams on every platform; the standard
// distribution objects do not guarantee that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without the cached spare: two draws per call, call-order
  // deterministic.
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // [0, n)
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ValueError("Rng::uniform_index: n must be positive");
    return static_cast<std::size_t>(gen_() % n);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw ValueError("Rng::sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = uniform_index(pool.size());
      out.push_back(pool[j]);
      pool[j] = pool.back();
      pool.pop_back();
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cssl
