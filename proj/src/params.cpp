#include "snowsim/params.hpp"

#include <sstream>

namespace snowsim {

bool ValidationReport::ok() const {
  for (const auto& c : checks) {
    if (!c.ok) return false;
  }
  return true;
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.ok) out.push_back(c.name);
  }
  return out;
}

ValidationReport validate(const ProtocolParams& p) {
  ValidationReport r;
  auto add = [&](std::string name, bool ok) { r.checks.push_back({std::move(name), ok}); };
  // Integer forms of the rational constraints: alpha1 > k/2 <=> 2*alpha1 > k.
  add("alpha1>k/2", 2ull * p.alpha1 > p.k);
  add("alpha2>=alpha1", p.alpha2 >= p.alpha1);
  add("k<=n", p.k <= p.n);
  add("alpha2<=k", p.alpha2 <= p.k);
  add("beta>=1", p.beta >= 1);
  add("delta>=1", p.delta >= 1);
  add("n>=1", p.n >= 1);
  add("f<=n", p.f <= p.n);
  if (p.delta_star) add("delta_star>=0", *p.delta_star >= 0);
  r.strict_paper_regime = 5ull * p.f < p.n && p.n >= 250;
  return r;
}

std::string describe(const ProtocolParams& p) {
  std::ostringstream os;
  os << "n=" << p.n << " f=" << p.f << " k=" << p.k << " alpha1=" << p.alpha1
     << " alpha2=" << p.alpha2 << " beta=" << p.beta << " delta=" << p.delta;
  if (p.delta_star) os << " delta_star=" << *p.delta_star;
  return os.str();
}

}  // namespace snowsim
