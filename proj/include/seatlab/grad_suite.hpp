#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seatlab/grad_check.hpp"

namespace seatlab {

// A finite-difference check over a random instance drawn from `seed`.
struct GradSuiteCase {
  std::string name;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

// Every differentiable op, the norm layer, each loss and the composed
// networks.
const std::vector<GradSuiteCase>& gradient_suite();

struct GradSuiteEntry {
  std::string name;
  Real max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  Real worst = 0;
  bool passed(Real tolerance) const;
};

// Runs each case for seeds 1..seeds. The observer sees each finished case.
GradSuiteReport run_gradient_suite(std::size_t seeds,
                                   const std::function<void(const GradSuiteEntry&)>& observer = {});

}  // namespace seatlab
