#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace meshssm::nd {

// Seeded generator whose full state round-trips through a string. The
// conversions to uniform/normal variates are fixed here rather than taken from
// <random> distributions, whose output is implementation-defined and which
// carry hidden cached state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Box–Muller; one draw consumes two uniforms.
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::string serialize() const;
  void deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace meshssm::nd
