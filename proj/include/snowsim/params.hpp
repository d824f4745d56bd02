#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace snowsim {

// Global or local timeslot. Signed so that "t - 2*delta" style arithmetic near
// the start of a run stays well defined.
using Slot = std::int64_t;
using ProcessId = std::uint32_t;
using Round = std::int64_t;

struct ProtocolParams {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t k = 0;
  std::uint32_t alpha1 = 0;
  std::uint32_t alpha2 = 0;
  std::uint32_t beta = 0;
  Slot delta = 1;
  std::optional<Slot> delta_star;

  bool operator==(const ProtocolParams&) const = default;
};

struct ValidationCheck {
  std::string name;
  bool ok = false;
  bool operator==(const ValidationCheck&) const = default;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool strict_paper_regime = false;

  bool ok() const;
  std::vector<std::string> failures() const;
  bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate(const ProtocolParams& p);

std::string describe(const ProtocolParams& p);

}  // namespace snowsim
