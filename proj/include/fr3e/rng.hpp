// Deterministic RNG streams. Every consumer derives its own mt19937_64 from
// (root seed, purpose tag, indices) via splitmix64 mixing, so adding or
// removing one consumer never shifts the draws seen by another. Distribution
// sampling is hand-rolled (std::uniform_int_distribution etc. are not
// guaranteed to produce the same values across standard libraries).

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace fr3e::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags for stream derivation. Fixed values: changing them changes
// every sampled trajectory for a given seed.
enum class Tag : std::uint64_t {
  env_prompt = 1,       // prompt generation for training groups
  policy_init = 2,      // parameter initialization
  base_rollout = 3,     // stage-1 responses
  explore_rollout = 4,  // stage-2 partial rollouts
  eval_prompt = 5,      // evaluation prompt set
  eval_rollout = 6,     // evaluation responses
  minibatch_shuffle = 7
};

// Fold (root, tag, ordered indices) into one 64-bit seed. Order matters:
// derive(s, t, {a, b}) != derive(s, t, {b, a}) in general.
inline std::uint64_t derive(std::uint64_t root, Tag tag,
                            std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  for (const std::uint64_t w : indices) h = splitmix64(h ^ w);
  return h;
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  Stream(std::uint64_t root, Tag tag,
         std::initializer_list<std::uint64_t> indices)
      : gen_(derive(root, tag, indices)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return (gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (pairs; the second half is cached).
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = next_unit();
    } while (u1 <= 0.0);
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates shuffle (last-to-first), independent of std::shuffle's
  // implementation-defined draw order.
  template <typename T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fr3e::rng
