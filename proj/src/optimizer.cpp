#include "rpl/optimizer.hpp"

#include <cmath>

namespace rpl {

void AdamW::step(ParameterStore& store) {
  auto& params = store.all();
  if (m_.size() != params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    if (p.frozen) continue;
    auto value = p.tensor.mutable_data();
    auto grad = p.tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    if (m.size() != value.size()) {
      m.assign(value.size(), 0.0);
      v.assign(value.size(), 0.0);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      double x = value[i];
      x -= config_.lr * config_.weight_decay * x;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      x -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      value[i] = quantize(x);
    }
  }
}

}  // namespace rpl
