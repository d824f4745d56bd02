#include "snowsim/binom.hpp"

#include <cctype>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace snowsim {

namespace {

mpz_class pow10(unsigned e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

mpz_class pow_z(const mpz_class& base, unsigned e) {
  mpz_class r;
  mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), e);
  return r;
}

void check_domain(unsigned k, const mpq_class& x, unsigned m) {
  if (m > k) throw std::domain_error("binomial count exceeds trial count");
  if (x < 0 || x > 1) throw std::domain_error("success probability outside [0,1]");
}

// Exact sum of pmf(k, x, m) for m in [lo, hi], with a common denominator b^k.
mpq_class tail_sum(unsigned k, const mpq_class& x, unsigned lo, unsigned hi) {
  const mpz_class a = x.get_num();
  const mpz_class b = x.get_den();
  const mpz_class c = b - a;
  mpz_class numerator = 0;
  for (unsigned m = lo; m <= hi; ++m) {
    numerator += binomial_coefficient(k, m) * pow_z(a, m) * pow_z(c, k - m);
  }
  mpq_class out(numerator, pow_z(b, k));
  out.canonicalize();
  return out;
}

// Rounds q*10^scale to an integer, ties to even. q must be non-negative.
mpz_class round_scaled(const mpq_class& q, int scale) {
  mpq_class scaled = q;
  if (scale >= 0) {
    scaled *= mpq_class(pow10(static_cast<unsigned>(scale)));
  } else {
    scaled /= mpq_class(pow10(static_cast<unsigned>(-scale)));
  }
  mpz_class quotient, remainder;
  mpz_fdiv_qr(quotient.get_mpz_t(), remainder.get_mpz_t(), scaled.get_num_mpz_t(),
              scaled.get_den_mpz_t());
  const mpz_class twice = remainder * 2;
  const int cmp_half = cmp(twice, scaled.get_den());
  if (cmp_half > 0 || (cmp_half == 0 && mpz_odd_p(quotient.get_mpz_t()))) quotient += 1;
  return quotient;
}

}  // namespace

Probability::Probability(mpq_class q) : q_(std::move(q)) {
  q_.canonicalize();
  if (q_ < 0 || q_ > 1) throw std::domain_error("probability outside [0,1]");
}

std::string Probability::decimal(unsigned digits_after_point) const {
  return to_fixed(q_, digits_after_point);
}

std::string Probability::scientific(unsigned significant_digits) const {
  return to_scientific(q_, significant_digits);
}

mpq_class parse_decimal(std::string_view text) {
  auto fail = [&]() -> mpq_class {
    throw std::invalid_argument("not a decimal number: '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const mpq_class num = parse_decimal(text.substr(0, slash));
    const mpq_class den = parse_decimal(text.substr(slash + 1));
    if (den == 0) return fail();
    mpq_class out = num / den;
    out.canonicalize();
    return out;
  }
  std::size_t i = 0;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  int frac_digits = 0;
  bool seen_point = false;
  for (; i < text.size() && text[i] != 'e' && text[i] != 'E'; ++i) {
    const char c = text[i];
    if (c == '.') {
      if (seen_point) return fail();
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      if (seen_point) ++frac_digits;
    } else {
      return fail();
    }
  }
  if (digits.empty()) return fail();
  long exponent = 0;
  if (i < text.size()) {
    ++i;
    std::string exp_text(text.substr(i));
    if (exp_text.empty()) return fail();
    std::size_t used = 0;
    try {
      exponent = std::stol(exp_text, &used);
    } catch (const std::exception&) {
      return fail();
    }
    if (used != exp_text.size() || exponent > 100000 || exponent < -100000) return fail();
  }
  mpq_class out{mpz_class(digits, 10)};
  const long shift = exponent - frac_digits;
  if (shift >= 0) {
    out *= mpq_class(pow10(static_cast<unsigned>(shift)));
  } else {
    out /= mpq_class(pow10(static_cast<unsigned>(-shift)));
  }
  out.canonicalize();
  return negative ? mpq_class(-out) : out;
}

std::string to_fixed(const mpq_class& q, unsigned digits_after_point) {
  if (q < 0) return "-" + to_fixed(-q, digits_after_point);
  std::string s = round_scaled(q, static_cast<int>(digits_after_point)).get_str();
  if (digits_after_point == 0) return s;
  if (s.size() <= digits_after_point) s.insert(0, digits_after_point + 1 - s.size(), '0');
  s.insert(s.size() - digits_after_point, ".");
  return s;
}

std::string to_scientific(const mpq_class& q, unsigned significant_digits) {
  if (significant_digits == 0) significant_digits = 1;
  if (q < 0) return "-" + to_scientific(-q, significant_digits);
  if (q == 0) return "0";
  // Estimate the decimal exponent, then correct it exactly.
  long e = static_cast<long>(q.get_num().get_str().size()) -
           static_cast<long>(q.get_den().get_str().size());
  auto ten_to = [](long x) {
    return x >= 0 ? mpq_class(pow10(static_cast<unsigned>(x)))
                  : mpq_class(mpz_class(1), pow10(static_cast<unsigned>(-x)));
  };
  while (q < ten_to(e)) --e;
  while (q >= ten_to(e + 1)) ++e;
  const int scale = static_cast<int>(significant_digits) - 1 - static_cast<int>(e);
  mpz_class mantissa = round_scaled(q, scale);
  if (mantissa == pow10(significant_digits)) {
    mantissa /= 10;
    ++e;
  }
  std::string digits = mantissa.get_str();
  std::string out(1, digits[0]);
  if (digits.size() > 1) out += "." + digits.substr(1);
  std::ostringstream exp;
  exp << (e < 0 ? "e-" : "e+") << std::setw(2) << std::setfill('0') << (e < 0 ? -e : e);
  return out + exp.str();
}

mpz_class binomial_coefficient(unsigned k, unsigned m) {
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), k, m);
  return r;
}

Probability bin_pmf(unsigned k, const mpq_class& x, unsigned m) {
  check_domain(k, x, m);
  return Probability(tail_sum(k, x, m, m));
}

Probability bin_tail_ge(unsigned k, const mpq_class& x, unsigned m) {
  check_domain(k, x, m);
  return Probability(tail_sum(k, x, m, k));
}

Probability bin_tail_le(unsigned k, const mpq_class& x, unsigned m) {
  check_domain(k, x, m);
  return Probability(tail_sum(k, x, 0, m));
}

Probability union_bound(const Probability& per_event, const mpz_class& opportunities) {
  if (opportunities < 0) throw std::domain_error("negative opportunity count");
  mpq_class product = per_event.value() * mpq_class(opportunities);
  if (product > 1) product = 1;
  return Probability(product);
}

bool BoundReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return !checks.empty();
}

namespace {

const char* relation_symbol(Relation r) {
  switch (r) {
    case Relation::Less: return "<";
    case Relation::LessEq: return "<=";
    case Relation::Greater: return ">";
  }
  return "?";
}

mpq_class dec(std::string_view s) { return parse_decimal(s); }

BoundCheck make_check(std::string id, std::string expression, mpq_class lhs, Relation rel,
                      mpq_class rhs) {
  BoundCheck c;
  c.id = std::move(id);
  c.expression = std::move(expression);
  c.lhs = std::move(lhs);
  c.relation = rel;
  c.rhs = std::move(rhs);
  switch (rel) {
    case Relation::Less:
      c.pass = c.lhs < c.rhs;
      c.margin = c.rhs - c.lhs;
      break;
    case Relation::LessEq:
      c.pass = c.lhs <= c.rhs;
      c.margin = c.rhs - c.lhs;
      break;
    case Relation::Greater:
      c.pass = c.lhs > c.rhs;
      c.margin = c.lhs - c.rhs;
      break;
  }
  return c;
}

}  // namespace

BoundReport verify_paper_bounds(const BoundOptions& options) {
  BoundReport report;
  auto& out = report.checks;
  auto ge = [](unsigned k, const mpq_class& x, unsigned m) { return bin_tail_ge(k, x, m).value(); };
  auto le = [](unsigned k, const mpq_class& x, unsigned m) { return bin_tail_le(k, x, m).value(); };

  // Agreement for the lockstep protocol.
  out.push_back(make_check("sf.red_next_round", "Bin(80, 0.8*0.75, >=41)",
                           ge(80, dec("0.8") * dec("0.75"), 41), Relation::Greater,
                           options.inject_wrong_bound ? dec("0.9556") : dec("0.9555")));
  out.push_back(make_check("sf.majority_holds", "Bin(200, 0.9555, <150)", le(200, dec("0.9555"), 149),
                           Relation::Less, dec("4e-24")));
  out.push_back(make_check("sf.sample_72_red", "Bin(80, 0.75*0.8+0.2, >=72)",
                           ge(80, dec("0.75") * dec("0.8") + dec("0.2"), 72), Relation::Less,
                           dec("0.0131")));
  {
    mpq_class p = 1;
    for (int i = 0; i < 12; ++i) p *= dec("0.0131");
    out.push_back(make_check("sf.twelve_rounds", "0.0131^12", p, Relation::Less, dec("1e-22")));
  }
  const mpq_class rounds_lhs = mpq_class(1000) * dec("365.25") * 86400 * 5;
  out.push_back(make_check("acct.rounds_1000y", "1000 years * 365.25 d * 86400 s * 5 rounds/s",
                           rounds_lhs, Relation::Less, dec("1.6e11")));
  out.push_back(make_check("sf.union_majority", "1.6e11 * 4e-24", dec("1.6e11") * dec("4e-24"),
                           Relation::Less, dec("7e-13")));
  out.push_back(make_check("sf.union_output", "1e-22 * 1e4 * 1.6e11",
                           dec("1e-22") * dec("1e4") * dec("1.6e11"), Relation::Less, dec("2e-7")));
  out.push_back(make_check("sf.total", "7e-13 + 2e-7", dec("7e-13") + dec("2e-7"), Relation::Less,
                           dec("3e-7")));

  // Partially synchronous binary protocol and chain consistency.
  out.push_back(make_check("diamond.few_locked", "Bin(80, 0.8*0.75, <=8)",
                           le(80, dec("0.8") * dec("0.75"), 8), Relation::Less, dec("1.18e-20")));
  out.push_back(make_check("diamond.incompatible_locked", "Bin(80, 0.2+0.8*0.25, >=72)",
                           ge(80, dec("0.2") + dec("0.8") * dec("0.25"), 72), Relation::Less,
                           dec("1.18e-20")));
  out.push_back(make_check("diamond.union_dagger0", "1.6e11 * 1e4 * 1.18e-20",
                           dec("1.6e11") * dec("1e4") * dec("1.18e-20"), Relation::Less,
                           dec("1.9e-5")));
  out.push_back(make_check("chain.x0_majority", "Bin(80, 0.75*0.8+0.2, >=72)",
                           ge(80, dec("0.75") * dec("0.8") + dec("0.2"), 72), Relation::Less,
                           dec("0.01309")));
  out.push_back(make_check("chain.x1_minority", "Bin(80, 0.5*0.8+0.2, >=72)",
                           ge(80, dec("0.5") * dec("0.8") + dec("0.2"), 72), Relation::Less,
                           dec("3e-9")));
  out.push_back(make_check("chain.x_sum", "0.01309 + 3e-9 + 1.18e-20",
                           dec("0.01309") + dec("3e-9") + dec("1.18e-20"), Relation::Less,
                           dec("0.0131")));
  out.push_back(make_check("diamond.total", "1.9e-5 + 2e-7", dec("1.9e-5") + dec("2e-7"),
                           Relation::Less, dec("2e-5")));

  // Quick finality.
  out.push_back(make_check("quick.few_compatible", "Bin(80, 0.9*0.6, <=8)",
                           le(80, dec("0.9") * dec("0.6"), 8), Relation::Less, dec("2e-16")));
  out.push_back(make_check("quick.rounds_per_hour", "(3600 + 2*60) s * 5 rounds/s",
                           mpq_class((3600 + 2 * 60) * 5), Relation::Less, dec("2e4")));
  out.push_back(make_check("quick.union_club0", "2e4 * 1e4 * 2e-16",
                           dec("2e4") * dec("1e4") * dec("2e-16"), Relation::LessEq, dec("4e-8")));
  out.push_back(make_check("quick.x2_incompatible", "Bin(80, 0.1+0.9*0.4, >=72)",
                           ge(80, dec("0.1") + dec("0.9") * dec("0.4"), 72), Relation::Less,
                           dec("2e-16")));
  out.push_back(make_check("quick.x0_majority", "Bin(80, 0.6*0.9+0.1, >=72)",
                           ge(80, dec("0.6") * dec("0.9") + dec("0.1"), 72), Relation::Less,
                           dec("2e-7")));
  out.push_back(make_check("quick.x1_minority", "Bin(80, 0.5*0.9+0.1, >=72)",
                           ge(80, dec("0.5") * dec("0.9") + dec("0.1"), 72), Relation::Less,
                           dec("2e-11")));
  out.push_back(make_check("quick.x_sum", "2e-7 + 2e-11 + 2e-16",
                           dec("2e-7") + dec("2e-11") + dec("2e-16"), Relation::Less, dec("3e-7")));
  out.push_back(make_check("quick.total", "3e-7 + 8e-8 + 2e-7",
                           dec("3e-7") + dec("8e-8") + dec("2e-7"), Relation::LessEq, dec("6e-7")));
  return report;
}

std::string BoundReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "id" << std::setw(46) << "expression" << std::setw(16)
     << "value" << std::setw(4) << "" << std::setw(12) << "bound" << std::setw(7) << "result"
     << "margin\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(28) << c.id << std::setw(46) << c.expression << std::setw(16)
       << to_scientific(c.lhs, 10) << std::setw(4) << relation_symbol(c.relation) << std::setw(12)
       << to_scientific(c.rhs, 4) << std::setw(7) << (c.pass ? "PASS" : "FAIL")
       << to_scientific(c.margin, 4) << "\n";
  }
  std::size_t passed = 0;
  for (const auto& c : checks) passed += c.pass ? 1 : 0;
  os << passed << "/" << checks.size() << " inequalities hold\n";
  return os.str();
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"id", c.id},
                   {"expression", c.expression},
                   {"value", to_scientific(c.lhs, 10)},
                   {"value_exact", c.lhs.get_str()},
                   {"relation", relation_symbol(c.relation)},
                   {"bound", to_scientific(c.rhs, 4)},
                   {"bound_exact", c.rhs.get_str()},
                   {"pass", c.pass},
                   {"margin", to_scientific(c.margin, 4)}});
  }
  return {{"checks", arr}, {"all_pass", all_pass()}};
}

}  // namespace snowsim
