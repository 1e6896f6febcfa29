#pragma once

#include <array>
#include <cstdint>

namespace tomo {

// splitmix64 step; used only to expand seeds into generator state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Identifies one independent random stream: a master seed shared by a whole
// experiment plus the replication index of the stream within it.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replication_index = 0;
};

// xoshiro256++ generator.  Each (master_seed, replication_index) pair maps to
// its own stream: the pair is folded into one word, scattered through the
// splitmix64 finalizer (so that consecutive replications land on far-apart
// splitmix windows), and the result seeds a splitmix64 run that fills the
// four state words.  An all-zero state (invalid for xoshiro) falls back to
// state {1,0,0,0}.
class Rng {
 public:
  explicit Rng(SeedSpec spec) {
    std::uint64_t sm =
        spec.master_seed ^ (0x9E3779B97F4A7C15ULL * (spec.replication_index + 1));
    sm = (sm ^ (sm >> 30)) * 0xBF58476D1CE4E5B9ULL;
    sm = (sm ^ (sm >> 27)) * 0x94D049BB133111EBULL;
    sm ^= sm >> 31;
    for (auto& word : state_) word = splitmix64_next(sm);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
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

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Bernoulli draw: true with probability `pass`.
  bool pass(double pass_probability) { return next_unit() < pass_probability; }

  const std::array<std::uint64_t, 4>& state() const { return state_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace tomo
