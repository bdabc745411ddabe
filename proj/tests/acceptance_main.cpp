// Runs the acceptance criteria with the default seed and pinned tolerances.
// Exits nonzero when any criterion fails.

#include <iostream>

#include "newton_lab/acceptance.hpp"

int main() {
  using namespace newton_lab;
  const auto report = acceptance::run(default_seed, acceptance::Thresholds{}, &std::cout);
  std::size_t passed = 0;
  for (const auto& r : report.results) passed += r.passed;
  std::cout << passed << "/" << report.results.size() << " criteria passed\n";
  return report.all_passed() ? 0 : 1;
}
