#include "snowsim/rng.hpp"

#include <stdexcept>

namespace snowsim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, StreamRole role, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(role));
  return splitmix64(h ^ (index * 0xd1b54a32d192ed03ull));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below needs a positive bound");
  // Reject the final partial block so every residue is equally likely.
  const std::uint64_t limit = ~0ull - (~0ull % bound + 1) % bound;
  for (;;) {
    const std::uint64_t x = next();
    if (x <= limit) return x % bound;
  }
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("Rng::between with empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  return lo + static_cast<std::int64_t>(below(span));
}

}  // namespace snowsim
