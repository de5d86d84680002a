#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mvx {

// 64-bit LCG (Knuth MMIX constants, modulus 2^64). std's engine guarantees
// the exact sequence on every conforming platform.
using Lcg64 = std::linear_congruential_engine<std::uint64_t, 6364136223846793005ULL,
                                              1442695040888963407ULL, 0ULL>;

// Seeded generator with a bit-exact contract:
//   state0  = splitmix64_finalize(seed)
//   u64     = next LCG state
//   uniform = ((u64 >> 11) + 1) * 2^-53          in (0, 1]
//   normal  = Box-Muller over two uniforms u1, u2:
//             r = sqrt(-2 ln u1); z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)
//             (z0 returned first, z1 cached for the next call)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename Item>
  void shuffle(std::vector<Item>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  Lcg64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_finalize(std::uint64_t x);

// Derives an independent stream seed for a named sub-purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mvx
