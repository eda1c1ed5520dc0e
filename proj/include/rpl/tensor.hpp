#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rpl {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Values are stored as doubles. In f32 mode every op result, gradient and
// optimizer update is rounded to the nearest float, so a run behaves like a
// float32 engine; f64 mode keeps full precision for finite-difference checks.
enum class Precision : std::uint8_t { f32, f64 };

Precision precision();
void set_precision(Precision p);
double quantize(double v);

class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p) : saved_(precision()) { set_precision(p); }
  ~PrecisionScope() { set_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

// Disables graph recording on this thread (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool saved_;
};
bool grad_enabled();

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this->grad into inputs' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Handle to a node of the reverse-mode graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;  // extent of axis 0
  std::size_t cols() const;  // extent of the last axis

  std::span<const double> data() const;
  // Mutable access is meant for leaves (parameters, inputs); mutating an
  // interior node invalidates the graph built on top of it.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;  // empty span when no gradient
  std::span<double> mutable_grad();      // allocates zeros if needed
  void zero_grad();

  // Leaf copy of the values, detached from any graph.
  Tensor detach() const;

  // Reverse pass from a scalar. Interior gradients are reset first; leaf
  // gradients accumulate across calls until zero_grad().
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_op_result(Shape, std::vector<double>, std::vector<Tensor>,
                               std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

// Builds an op result; the backward closure is attached only when some
// input requires a gradient and recording is enabled.
Tensor make_op_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward);

// ----- ops -----------------------------------------------------------------
// Shapes are 1-D or 2-D. Errors raise rpl::Error(ShapeMismatch) naming both
// shapes.

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                   // [m,n] -> [n,m]
// Same shape, or b 1-D matching a's last axis (trailing bias).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise, same shape
Tensor scale(const Tensor& a, double s);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor sum(const Tensor& a);                         // -> scalar [1]
Tensor mean(const Tensor& a);                        // -> scalar [1]
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);
// Row-wise log-softmax over entries with mask=1; masked-out entries yield 0
// and receive no gradient. mask is row-major [rows x cols].
Tensor log_softmax_masked(const Tensor& a, const std::vector<std::uint8_t>& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor embedding_gather(const Tensor& table, const std::vector<std::size_t>& indices);
// out(i, j) = a(i, index[i * m + j]) for a [n, r] and index [n x m].
Tensor take_along_rows(const Tensor& a, const std::vector<std::size_t>& index, std::size_t m);
Tensor l2_normalize_rows(const Tensor& a);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);  // vectors -> scalar
Tensor cosine_matrix(const Tensor& a, const Tensor& b);      // [n,d],[m,d] -> [n,m]
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor log(const Tensor& x);

}  // namespace rpl
