#pragma once

#include <cstdint>
#include <random>

namespace stable::rng {

// splitmix64 step (Vigna). Used only to expand seeds, never as the
// simulation generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream derivation: stream(seed, index) expands the pair
// (master seed, replica index) into four 64-bit words via splitmix64.
// Replicas drawn from distinct indices are decorrelated regardless of the
// thread that executes them, which is what makes the Monte Carlo layer
// thread-count invariant.
struct StreamSeed {
  std::uint64_t w[4];
};

inline StreamSeed stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  StreamSeed out{};
  for (auto& w : out.w) w = splitmix64(s);
  return out;
}

// Per-replica generator. mt19937_64 seeded from the full expanded stream
// (seed_seq mixes all four words into the state).
class ReplicaRng {
 public:
  ReplicaRng(std::uint64_t master, std::uint64_t replica) {
    const StreamSeed s = stream_seed(master, replica);
    std::seed_seq seq{static_cast<std::uint32_t>(s.w[0]), static_cast<std::uint32_t>(s.w[0] >> 32),
                      static_cast<std::uint32_t>(s.w[1]), static_cast<std::uint32_t>(s.w[1] >> 32),
                      static_cast<std::uint32_t>(s.w[2]), static_cast<std::uint32_t>(s.w[2] >> 32),
                      static_cast<std::uint32_t>(s.w[3]), static_cast<std::uint32_t>(s.w[3] >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace stable::rng
