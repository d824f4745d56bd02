#include "snowsim/node.hpp"

#include "snowsim/rng.hpp"

namespace snowsim {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ v); }

std::uint64_t mix_bits(std::uint64_t h, const BitString& b) {
  h = mix(h, b.size());
  for (std::uint64_t w : b.words()) h = mix(h, w);
  return h;
}

}  // namespace

std::uint64_t NodeSnapshot::digest() const {
  std::uint64_t h = mix(0x736e6f77ull, static_cast<std::uint64_t>(round));
  h = mix(h, static_cast<std::uint64_t>(rounds_started));
  h = mix_bits(h, pref);
  h = mix_bits(h, final);
  h = mix(h, locks.size());
  for (const auto& l : locks) {
    h = mix_bits(h, l.top);
    h = mix(h, l.from_len);
    h = mix(h, static_cast<std::uint64_t>(l.since));
  }
  h = mix(h, temp_final.size());
  for (const auto& t : temp_final) h = mix(mix_bits(h, t.sigma), static_cast<std::uint64_t>(t.round));
  h = mix(h, output ? 2u + *output : 0u);
  return mix(h, terminated ? 1 : 0);
}

std::vector<ProcessId> draw_sample(Rng& rng, std::uint32_t n, std::uint32_t k) {
  std::vector<ProcessId> out(k);
  for (auto& id : out) id = static_cast<ProcessId>(rng.below(n));
  return out;
}

}  // namespace snowsim
