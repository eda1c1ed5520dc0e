#include "rpl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rpl/error.hpp"

namespace rpl {

using detail::Node;

namespace {

thread_local Precision t_precision = Precision::f32;
thread_local bool t_grad_enabled = true;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, shape_string(a) + " vs " + shape_string(b), op);
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a) {
  throw Error(ErrorCode::ShapeMismatch, shape_string(a), op);
}

// (outer, n, inner) decomposition of a shape around `axis`.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) shape_error(std::string(op) + ": axis out of range", shape);
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) shape_error(std::string(op) + " requires a 2-D tensor", t.shape());
}

// Gradient buffer of input k when it participates in differentiation.
std::vector<double>* input_grad(Node& self, std::size_t k) {
  Node& in = *self.inputs[k];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Precision precision() { return t_precision; }
void set_precision(Precision p) { t_precision = p; }

double quantize(double v) {
  return t_precision == Precision::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

NoGradScope::NoGradScope() : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradScope::~NoGradScope() { t_grad_enabled = saved_; }
bool grad_enabled() { return t_grad_enabled; }

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(shape),
                "data length " + std::to_string(values.size()) + " does not match shape");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  for (double& v : values) v = quantize(v);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape.front(); }
std::size_t Tensor::cols() const { return node_->shape.empty() ? 1 : node_->shape.back(); }

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::NotScalarOutput, shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }
double Tensor::at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
bool Tensor::is_leaf() const { return node_->is_leaf(); }

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) throw Error(ErrorCode::NotScalarOutput, shape_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* in = node->inputs[next++].get();
      if (in->requires_grad && visited.insert(in).second) stack.emplace_back(in, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf() || !n->backward) continue;
    if (t_precision == Precision::f32) {
      for (double& g : n->grad) g = quantize(g);
    }
    n->backward(*n);
  }
  if (t_precision == Precision::f32) {
    for (Node* n : order) {
      if (n->is_leaf()) {
        for (double& g : n->grad) g = quantize(g);
      }
    }
  }
}

Tensor make_op_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                      std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  if (t_precision == Precision::f32) {
    for (double& v : values) v = quantize(v);
  }
  node->value = std::move(values);
  bool needs = false;
  if (t_grad_enabled) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_op_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * G[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_op_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    auto A = a.data();
    auto B = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    return make_op_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
      for (std::size_t k = 0; k < 2; ++k) {
        if (auto* g = input_grad(self, k)) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
        }
      }
    });
  }
  if (b.rank() == 1 && a.rank() >= 1 && a.cols() == b.size()) {
    const std::size_t n = b.size();
    std::vector<double> out(a.size());
    auto A = a.data();
    auto B = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i % n];
    return make_op_result(a.shape(), std::move(out), {a, b}, [n](Node& self) {
      if (auto* ga = input_grad(self, 0)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
      }
      if (auto* gb = input_grad(self, 1)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i % n] += self.grad[i];
      }
    });
  }
  shape_error("add", a.shape(), b.shape());
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * B[i];
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i] * A[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * s;
  return make_op_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * s;
    }
  });
}

// ---------------------------------------------------------------------------
// Structural


Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "[]", "concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error("concat: axis out of range", first);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) shape_error("concat", first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d]) shape_error("concat", first, p.shape());
    }
    out_shape[axis] += p.shape()[axis];
  }
  const AxisView ov = axis_view(out_shape, axis, "concat");
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t pn = p.shape()[axis];
    auto P = p.data();
    for (std::size_t o = 0; o < ov.outer; ++o)
      for (std::size_t i = 0; i < pn; ++i)
        for (std::size_t r = 0; r < ov.inner; ++r)
          out[(o * ov.n + offset + i) * ov.inner + r] = P[(o * pn + i) * ov.inner + r];
    offset += pn;
  }
  return make_op_result(out_shape, std::move(out), parts, [ov, offsets, axis](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto* g = input_grad(self, k);
      if (!g) continue;
      const std::size_t pn = self.inputs[k]->shape[axis];
      for (std::size_t o = 0; o < ov.outer; ++o)
        for (std::size_t i = 0; i < pn; ++i)
          for (std::size_t r = 0; r < ov.inner; ++r)
            (*g)[(o * pn + i) * ov.inner + r] += self.grad[(o * ov.n + offsets[k] + i) * ov.inner + r];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(a.shape(), axis, "slice");
  if (start + length > v.n) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(a.shape()),
                "slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                    ") out of range on axis " + std::to_string(axis));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<double> out(shape_size(out_shape));
  auto A = a.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < length; ++i)
      for (std::size_t r = 0; r < v.inner; ++r)
        out[(o * length + i) * v.inner + r] = A[(o * v.n + start + i) * v.inner + r];
  return make_op_result(out_shape, std::move(out), {a}, [v, start, length](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < length; ++i)
          for (std::size_t r = 0; r < v.inner; ++r)
            (*g)[(o * v.n + start + i) * v.inner + r] += self.grad[(o * length + i) * v.inner + r];
    }
  });
}

Tensor sum(const Tensor& a) {
  auto A = a.data();
  double s = 0.0;
  for (double v : A) s += v;
  return make_op_result({1}, {s}, {a}, [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (double& x : *g) x += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) shape_error("mean of empty tensor", a.shape());
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Normalizations

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a.shape(), axis, "softmax");
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t r = 0; r < v.inner; ++r) {
      auto idx = [&](std::size_t i) { return (o * v.n + i) * v.inner + r; };
      double mx = -INFINITY;
      for (std::size_t i = 0; i < v.n; ++i) mx = std::max(mx, A[idx(i)]);
      double z = 0.0;
      for (std::size_t i = 0; i < v.n; ++i) z += (out[idx(i)] = std::exp(A[idx(i)] - mx));
      for (std::size_t i = 0; i < v.n; ++i) out[idx(i)] /= z;
    }
  }
  return make_op_result(a.shape(), std::move(out), {a}, [v](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& Y = self.value;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t r = 0; r < v.inner; ++r) {
        auto idx = [&](std::size_t i) { return (o * v.n + i) * v.inner + r; };
        double dot = 0.0;
        for (std::size_t i = 0; i < v.n; ++i) dot += self.grad[idx(i)] * Y[idx(i)];
        for (std::size_t i = 0; i < v.n; ++i) (*g)[idx(i)] += Y[idx(i)] * (self.grad[idx(i)] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a.shape(), axis, "log_softmax");
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t r = 0; r < v.inner; ++r) {
      auto idx = [&](std::size_t i) { return (o * v.n + i) * v.inner + r; };
      double mx = -INFINITY;
      for (std::size_t i = 0; i < v.n; ++i) mx = std::max(mx, A[idx(i)]);
      double z = 0.0;
      for (std::size_t i = 0; i < v.n; ++i) z += std::exp(A[idx(i)] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < v.n; ++i) out[idx(i)] = A[idx(i)] - lse;
    }
  }
  return make_op_result(a.shape(), std::move(out), {a}, [v](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& Y = self.value;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t r = 0; r < v.inner; ++r) {
        auto idx = [&](std::size_t i) { return (o * v.n + i) * v.inner + r; };
        double total = 0.0;
        for (std::size_t i = 0; i < v.n; ++i) total += self.grad[idx(i)];
        for (std::size_t i = 0; i < v.n; ++i) (*g)[idx(i)] += self.grad[idx(i)] - std::exp(Y[idx(i)]) * total;
      }
    }
  });
}

Tensor log_softmax_masked(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  require_2d(a, "log_softmax_masked");
  if (mask.size() != a.size()) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(a.shape()), "mask length " + std::to_string(mask.size()));
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<double> out(a.size(), 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j)
      if (mask[i * cols + j]) mx = std::max(mx, A[i * cols + j]);
    if (mx == -INFINITY) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j)
      if (mask[i * cols + j]) z += std::exp(A[i * cols + j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j)
      if (mask[i * cols + j]) out[i * cols + j] = A[i * cols + j] - lse;
  }
  return make_op_result(a.shape(), std::move(out), {a}, [rows, cols, mask](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& Y = self.value;
    for (std::size_t i = 0; i < rows; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < cols; ++j)
        if (mask[i * cols + j]) total += self.grad[i * cols + j];
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t k = i * cols + j;
        if (mask[k]) (*g)[k] += self.grad[k] - std::exp(Y[k]) * total;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  if (x.rank() == 0 || n == 0) shape_error("layer_norm: empty normalized axis", x.shape());
  if (gain.rank() != 1 || gain.size() != n) shape_error("layer_norm gain", x.shape(), gain.shape());
  if (bias.rank() != 1 || bias.size() != n) shape_error("layer_norm bias", x.shape(), bias.shape());
  const std::size_t rows = x.size() / n;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  auto X = x.data();
  auto G = gain.data();
  auto B = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &X[r * n];
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += xr[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) {
      xhat[r * n + i] = (xr[i] - mu) * rstd[r];
      out[r * n + i] = xhat[r * n + i] * G[i] + B[i];
    }
  }
  return make_op_result(x.shape(), std::move(out), {x, gain, bias},
                        [n, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
    const auto& G = self.inputs[1]->value;
    auto* gx = input_grad(self, 0);
    auto* gg = input_grad(self, 1);
    auto* gb = input_grad(self, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = &self.grad[r * n];
      const double* xh = &xhat[r * n];
      if (gg) for (std::size_t i = 0; i < n; ++i) (*gg)[i] += dy[i] * xh[i];
      if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] += dy[i];
      if (gx) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = dy[i] * G[i];
          m1 += d;
          m2 += d * xh[i];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          (*gx)[r * n + i] += rstd[r] * (dy[i] * G[i] - m1 - xh[i] * m2);
        }
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  if (a.rank() == 0 || a.rank() > 2) shape_error("l2_normalize_rows", a.shape());
  const std::size_t n = a.cols();
  const std::size_t rows = a.size() / std::max<std::size_t>(n, 1);
  std::vector<double> out(a.size());
  std::vector<double> norms(rows);
  auto A = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += A[r * n + i] * A[r * n + i];
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) throw Error(ErrorCode::ZeroVector, "row " + std::to_string(r));
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = A[r * n + i] / norms[r];
  }
  return make_op_result(a.shape(), std::move(out), {a}, [n, rows, norms = std::move(norms)](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& U = self.value;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += U[r * n + i] * self.grad[r * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        (*g)[r * n + i] += (self.grad[r * n + i] - U[r * n + i] * dot) / norms[r];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Indexing

Tensor embedding_gather(const Tensor& table, const std::vector<std::size_t>& indices) {
  require_2d(table, "embedding_gather");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  std::vector<double> out(indices.size() * d);
  auto T = table.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= vocab) {
      throw Error(ErrorCode::ShapeMismatch, shape_string(table.shape()),
                  "embedding index " + std::to_string(indices[i]) + " out of range");
    }
    std::copy_n(&T[indices[i] * d], d, &out[i * d]);
  }
  return make_op_result({indices.size(), d}, std::move(out), {table}, [indices, d](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) (*g)[indices[i] * d + c] += self.grad[i * d + c];
    }
  });
}

Tensor take_along_rows(const Tensor& a, const std::vector<std::size_t>& index, std::size_t m) {
  require_2d(a, "take_along_rows");
  const std::size_t n = a.shape()[0], r = a.shape()[1];
  if (index.size() != n * m) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(a.shape()),
                "index length " + std::to_string(index.size()) + " != rows*" + std::to_string(m));
  }
  std::vector<double> out(n * m);
  auto A = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t c = index[i * m + j];
      if (c >= r) throw Error(ErrorCode::ShapeMismatch, shape_string(a.shape()), "column index out of range");
      out[i * m + j] = A[i * r + c];
    }
  }
  return make_op_result({n, m}, std::move(out), {a}, [index, n, m, r](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*g)[i * r + index[i * m + j]] += self.grad[i * m + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Similarities

namespace {

Tensor as_row(const Tensor& a) {
  if (a.rank() == 2 && a.shape()[0] == 1) return a;
  if (a.rank() != 1) shape_error("expected a vector", a.shape());
  const std::size_t n = a.size();
  std::vector<double> values(a.data().begin(), a.data().end());
  return make_op_result({1, n}, std::move(values), {a}, [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

}  // namespace

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) shape_error("cosine_similarity", a.shape(), b.shape());
  return sum(mul(l2_normalize_rows(as_row(a)), l2_normalize_rows(as_row(b))));
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) shape_error("cosine_matrix", a.shape(), b.shape());
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

// ---------------------------------------------------------------------------
// Pointwise

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
  return make_op_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      const auto& X = self.inputs[0]->value;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (X[i] > 0.0) (*g)[i] += self.grad[i];
    }
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = X[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return make_op_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& X = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = X[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      (*g)[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
    }
  });
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.size());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(X[i]);
  return make_op_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      const auto& X = self.inputs[0]->value;
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] / X[i];
    }
  });
}

}  // namespace rpl
