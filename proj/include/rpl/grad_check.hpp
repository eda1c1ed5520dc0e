#pragma once

#include <functional>

#include "rpl/tensor.hpp"

namespace rpl {

// Max over elements of |analytic - central difference| /
// max(|analytic|, |numeric|, 1e-8). `input` must be a leaf; its gradient is
// reset before the analytic pass. Run under Precision::f64.
double grad_check(const std::function<Tensor(const Tensor&)>& fn, Tensor input, double h = 1e-6);

}  // namespace rpl
