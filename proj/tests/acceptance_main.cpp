// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <iostream>

#include "magsim/checks.hpp"

int main() {
  const auto results = magsim::checks::run_acceptance_checks(&std::cout);
  int failures = 0;
  for (const auto& r : results) failures += r.pass ? 0 : 1;
  if (failures == 0) {
    std::cout << "acceptance: all " << results.size() << " criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << failures << " of " << results.size()
            << " criteria FAILED\n";
  return 1;
}
