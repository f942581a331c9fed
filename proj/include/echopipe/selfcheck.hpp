#pragma once

#include <string>
#include <vector>

namespace echopipe {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast invariant suite: voting against brute force, metric fixtures, container
/// round trip, equalization fixture and a finite-difference gradient check on a
/// reduced-width model. Takes a few seconds.
std::vector<CheckResult> run_selfcheck();

}  // namespace echopipe
