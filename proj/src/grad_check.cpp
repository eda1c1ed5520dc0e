#include "rpl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rpl {

double grad_check(const std::function<Tensor(const Tensor&)>& fn, Tensor input, double h) {
  const bool saved = input.requires_grad();
  input.set_requires_grad(true);
  input.zero_grad();
  fn(input).backward();
  std::vector<double> analytic(input.grad().begin(), input.grad().end());
  analytic.resize(input.size(), 0.0);

  double worst = 0.0;
  {
    NoGradScope no_grad;
    auto values = input.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double plus = fn(input).item();
      values[i] = orig - h;
      const double minus = fn(input).item();
      values[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  input.zero_grad();
  input.set_requires_grad(saved);
  return worst;
}

}  // namespace rpl
