#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace snowsim {

// Exact probability in [0,1].
class Probability {
 public:
  Probability() : q_(0) {}
  // Throws std::domain_error if q is outside [0,1].
  explicit Probability(mpq_class q);

  const mpq_class& value() const { return q_; }
  std::string decimal(unsigned digits_after_point) const;
  std::string scientific(unsigned significant_digits) const;

  friend bool operator==(const Probability& a, const Probability& b) { return a.q_ == b.q_; }
  friend bool operator<(const Probability& a, const Probability& b) { return a.q_ < b.q_; }

 private:
  mpq_class q_;
};

// Parses "0.9555", "1.18e-20", "4E-24", "3/5" or "7" into an exact rational.
mpq_class parse_decimal(std::string_view text);

// Round-half-to-even decimal renderings of an exact non-negative rational.
std::string to_fixed(const mpq_class& q, unsigned digits_after_point);
std::string to_scientific(const mpq_class& q, unsigned significant_digits);

mpz_class binomial_coefficient(unsigned k, unsigned m);

Probability bin_pmf(unsigned k, const mpq_class& x, unsigned m);
Probability bin_tail_ge(unsigned k, const mpq_class& x, unsigned m);
Probability bin_tail_le(unsigned k, const mpq_class& x, unsigned m);

// min(1, per_event * opportunities). Opportunities may exceed 64 bits.
Probability union_bound(const Probability& per_event, const mpz_class& opportunities);

enum class Relation { Less, LessEq, Greater };

struct BoundCheck {
  std::string id;
  std::string expression;
  mpq_class lhs;
  Relation relation = Relation::Less;
  mpq_class rhs;
  bool pass = false;
  // rhs - lhs for "<"/"<=" and lhs - rhs for ">"; positive iff the strict form holds.
  mpq_class margin;
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  bool all_pass() const;
  std::string table() const;
  nlohmann::json to_json() const;
};

struct BoundOptions {
  // Negative control: replaces one threshold by a value the exact result
  // violates, so callers can check that failures propagate.
  bool inject_wrong_bound = false;
};

BoundReport verify_paper_bounds(const BoundOptions& options = {});

}  // namespace snowsim
