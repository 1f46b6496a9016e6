#pragma once

// Property-check suite behind the `verify` command: group axioms, action
// laws, equivariance and lift residuals, linearisation oracles, and
// data-structure exactness checks. Every check runs with a fixed seed and
// reports its worst residual next to the tolerance it was held to.

#include <cstdint>
#include <string>
#include <vector>

#include "lio/eqf.hpp"

namespace lio {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;  // per-block itemisation for the matrix oracles
};

// Closed-form state matrix against the finite-difference Jacobian of the
// error flow at random states. opts is a test hook: fault injections there
// must make this check fail.
CheckResult check_f_oracle(int states, const FOptions& opts = {}, std::uint64_t seed = 11);

// All checks, optionally filtered by substring match on the check name.
std::vector<CheckResult> run_verification(const std::string& filter = "");

// Prints the result table and a max-equivariance-residual summary line.
// Returns 0 when every selected check passed, 1 otherwise.
int cmd_verify(const std::string& filter = "");

}  // namespace lio
