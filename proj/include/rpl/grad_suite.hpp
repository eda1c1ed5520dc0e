#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpl {

struct GradCheckResult {
  std::string name;
  bool composite = false;
  std::uint64_t seed = 0;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kCompositeTolerance = 1e-3;

// Central finite differences in 64-bit mode over every differentiable op and
// the composite encoder/loss heads, once per seed in [first_seed,
// first_seed + seeds).
std::vector<GradCheckResult> run_grad_suite(std::uint64_t first_seed = 1, std::size_t seeds = 10);

}  // namespace rpl
