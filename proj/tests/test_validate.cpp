#include <doctest.h>

#include <algorithm>

#include "bitattn/validate.hpp"

using namespace bitattn;

namespace {

const PropertyResult* find_property(const std::vector<PropertyResult>& rs,
                                    const std::string& name) {
  const auto it = std::find_if(rs.begin(), rs.end(),
                               [&](const PropertyResult& r) {
                                 return r.name == name;
                               });
  return it == rs.end() ? nullptr : &*it;
}

}  // namespace

TEST_CASE("the validation suite passes with default options") {
  ValidateOptions opt;
  const auto results = run_validation_suite(opt);
  REQUIRE(!results.empty());
  for (const PropertyResult& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("sabotage mode trips exactly the kernel cross-check") {
  ValidateOptions opt;
  opt.sabotage = true;
  const auto results = run_validation_suite(opt);
  const PropertyResult* hit = find_property(results, "hamming_kernel_oracle");
  REQUIRE(hit != nullptr);
  CHECK(!hit->pass);
  for (const PropertyResult& r : results) {
    if (r.name == "hamming_kernel_oracle") continue;
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("results are reproducible run to run and across thread counts") {
  ValidateOptions a;
  a.seed = 123;
  a.threads = 1;
  ValidateOptions b = a;
  ValidateOptions c = a;
  c.threads = 4;
  const auto ra = run_validation_suite(a);
  const auto rb = run_validation_suite(b);
  const auto rc = run_validation_suite(c);
  REQUIRE(ra.size() == rb.size());
  REQUIRE(ra.size() == rc.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].name == rb[i].name);
    CHECK(ra[i].pass == rb[i].pass);
    CHECK(ra[i].measured == rb[i].measured);
    CHECK(ra[i].detail == rb[i].detail);
    CHECK(ra[i].measured == rc[i].measured);
    CHECK(ra[i].pass == rc[i].pass);
  }
}
