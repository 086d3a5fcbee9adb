#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nscl {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
};

/// Names accepted by run_verification.
std::span<const std::string_view> verification_suites();

/// Runs one property suite: projector, covariance, lemma1, plasticity or
/// sweep. Throws ConfigError for an unknown name.
SuiteResult run_verification(std::string_view suite, std::uint64_t seed);

/// One `PASS|FAIL <suite>/<check> measured=<v> threshold=<t>` line per check.
void print_suite(std::ostream& out, const SuiteResult& result);

}  // namespace nscl
