#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bitattn {

struct PropertyResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;  // property-specific figure (max error, count, ...)
  std::string detail;
};

struct ValidateOptions {
  std::uint64_t seed = 42;
  int threads = 1;
  // Deliberately flips one data bit inside a packed tensor before the
  // kernel/oracle comparison, to prove the suite can actually fail.
  bool sabotage = false;
};

// Runs the self-check battery (conversion identities, kernel vs oracle
// agreement, score bounds, gradient checks, cost-model consistency, ...)
// and reports one result per property. A property that throws is reported
// as failed with the exception text in `detail`.
std::vector<PropertyResult> run_validation_suite(const ValidateOptions& opt);

}  // namespace bitattn
