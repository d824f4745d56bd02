#include <algorithm>
#include "doctest.h"
#include "snowsim/params.hpp"

using namespace snowsim;

namespace {

bool has_failure(const ValidationReport& r, const std::string& name) {
  const auto f = r.failures();
  return std::find(f.begin(), f.end(), name) != f.end();
}

}  // namespace

TEST_CASE("large parameter set passes every constraint and is in the strict regime") {
  const ValidationReport r = validate({250, 49, 80, 41, 72, 12, 10, std::nullopt});
  CHECK(r.ok());
  CHECK(r.strict_paper_regime);
}

TEST_CASE("alpha1 at exactly k/2 is rejected") {
  const ValidationReport r = validate({250, 49, 80, 40, 72, 12, 10, std::nullopt});
  CHECK_FALSE(r.ok());
  CHECK(has_failure(r, "alpha1>k/2"));
  CHECK(r.failures().size() == 1);
}

TEST_CASE("desk-scale parameters pass but are outside the strict regime") {
  const ValidationReport r = validate({50, 9, 20, 11, 18, 6, 4, std::nullopt});
  CHECK(r.ok());
  CHECK_FALSE(r.strict_paper_regime);
}

TEST_CASE("each constraint can fail on its own") {
  CHECK(has_failure(validate({50, 9, 20, 11, 10, 6, 4, {}}), "alpha2>=alpha1"));
  CHECK(has_failure(validate({10, 0, 20, 11, 18, 6, 4, {}}), "k<=n"));
  CHECK(has_failure(validate({50, 0, 20, 11, 21, 6, 4, {}}), "alpha2<=k"));
  CHECK(has_failure(validate({50, 0, 20, 11, 18, 0, 4, {}}), "beta>=1"));
  CHECK(has_failure(validate({50, 0, 20, 11, 18, 6, 0, {}}), "delta>=1"));
  CHECK(has_failure(validate({50, 51, 20, 11, 18, 6, 4, {}}), "f<=n"));
  CHECK(has_failure(validate({50, 0, 20, 11, 18, 6, 4, Slot{-1}}), "delta_star>=0"));
}

TEST_CASE("strict regime needs f < n/5") {
  CHECK_FALSE(validate({250, 50, 80, 41, 72, 12, 10, {}}).strict_paper_regime);
  CHECK(validate({250, 49, 80, 41, 72, 12, 10, {}}).strict_paper_regime);
}

TEST_CASE("describe lists every field") {
  const auto s = describe({50, 9, 20, 11, 18, 6, 4, Slot{0}});
  CHECK(s == "n=50 f=9 k=20 alpha1=11 alpha2=18 beta=6 delta=4 delta_star=0");
}
