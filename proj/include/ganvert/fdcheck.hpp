#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganvert/graph.hpp"

namespace ganvert {

struct FdCaseResult {
  std::string primitive;
  int trials = 0;
  GradCheckReport worst;  // largest deviations seen across trials and operands
};

// Cases covered by the seeded finite-difference suite: every tensor
// primitive plus "full_loss", the composite mse + feature objective.
const std::vector<std::string>& fd_checked_primitives();

// Runs `trials` seeded random-input gradient checks for one primitive,
// differentiating the wrapped scalar output with respect to every tensor
// operand. Inputs near relu/maxpool kinks are resampled so central
// differences are valid.
FdCaseResult fd_check_primitive(const std::string& primitive, std::uint64_t seed, int trials,
                                double tolerance);

// The full suite over every primitive.
std::vector<FdCaseResult> fd_check_all(std::uint64_t seed, int trials, double tolerance);

}  // namespace ganvert
