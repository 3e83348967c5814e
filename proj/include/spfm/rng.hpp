// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "spfm/types.hpp"

namespace spfm {

// Portable deterministic PRNG: xoshiro256++ (Blackman & Vigna), state
// expanded from the seed material with the splitmix64 finalizer. Every
// random draw in the project flows through this generator so results are
// bit-identical across platforms; the C++ standard distributions are
// implementation-defined and never used.
//
// Stream derivation: Rng::derive({k0, k1, ...}) absorbs each 64-bit key
// into an accumulator with splitmix64 and expands the accumulator into
// the four state words. Distinct key tuples give independent streams;
// per-sample streams are keyed as {seed, tag, epoch, index}.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static Rng derive(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t acc = kGolden;
    for (std::uint64_t k : keys) acc = mix64(acc ^ mix64(k));
    Rng r;
    std::uint64_t sm = acc;
    for (auto& w : r.state_) {
      w = mix64(sm);
      sm += kGolden;
    }
    return r;
  }

  static Rng seeded(std::uint64_t seed) { return derive({seed}); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  Scalar uniform() { return static_cast<Scalar>(next() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). n must fit comfortably below 2^53; the
  // floating-point path keeps the draw portable.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<Scalar>(n));
  }

  // Standard normal via Box-Muller on (0,1] uniforms; the spare value is
  // cached so consecutive draws stay cheap and deterministic.
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const Scalar u1 = 1.0 - uniform();  // (0, 1], log is finite
    const Scalar u2 = uniform();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec2 normal2() {
    const Scalar x = normal();
    const Scalar y = normal();
    return Vec2(x, y);
  }

  // Fisher-Yates shuffle, descending, using uniform_index.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{1, 2, 3, 4};
  Scalar spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags. Keyed streams keep every consumer of randomness isolated:
// changing the number of draws in one place never shifts another.
namespace stream {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kDataGen = 2;
inline constexpr std::uint64_t kCorrupt = 3;
inline constexpr std::uint64_t kEpochShuffle = 4;
inline constexpr std::uint64_t kTrainSample = 5;
inline constexpr std::uint64_t kSampler = 6;
inline constexpr std::uint64_t kEvalNoise = 7;
inline constexpr std::uint64_t kEvalConditions = 8;
inline constexpr std::uint64_t kMismatch = 9;
}  // namespace stream

}  // namespace spfm
