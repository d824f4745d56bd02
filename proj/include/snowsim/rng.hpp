#pragma once

#include <cstdint>
#include <random>

namespace snowsim {

enum class StreamRole : std::uint64_t {
  Sample = 1,
  Byzantine = 2,
  Delay = 3,
  Input = 4,
  Schedule = 5,
  Blocks = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for the named sub-stream (seed, role, index). Adding streams for new
// roles never shifts the values drawn from existing ones.
std::uint64_t derive_seed(std::uint64_t seed, StreamRole role, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, StreamRole role, std::uint64_t index)
      : engine_(derive_seed(seed, role, index)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, bound). std::uniform_int_distribution is implementation
  // defined, so traces would differ between standard libraries.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  bool coin() { return (next() >> 63) != 0; }
  // True with probability num/den.
  bool chance(std::uint64_t num, std::uint64_t den) { return below(den) < num; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace snowsim
