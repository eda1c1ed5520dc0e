#include "rpl/grad_suite.hpp"

#include <functional>
#include <random>

#include "rpl/encoder.hpp"
#include "rpl/grad_check.hpp"
#include "rpl/objectives.hpp"
#include "rpl/synthetic.hpp"
#include "rpl/tensor.hpp"

namespace rpl {

namespace {

using Rng = std::mt19937_64;

// Values bounded away from zero so relu and friends stay off their kinks.
Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) {
    do x = u(rng);
    while (lo < 0.0 && std::abs(x) < 0.05);
  }
  return Tensor::from(std::move(shape), std::move(v));
}

// Random projection to a scalar so every output element matters.
Tensor project(const Tensor& y, Rng& rng) {
  Tensor w = random_tensor(y.shape(), rng);
  return sum(mul(y, w));
}

struct OpCase {
  std::string name;
  Shape shape;
  std::function<Tensor(const Tensor&, Rng&)> fn;
  double lo = -1.0, hi = 1.0;
};

std::vector<OpCase> op_cases() {
  return {
      {"matmul_lhs", {3, 4}, [](const Tensor& x, Rng& r) { return matmul(x, random_tensor({4, 2}, r)); }},
      {"matmul_rhs", {4, 2}, [](const Tensor& x, Rng& r) { return matmul(random_tensor({3, 4}, r), x); }},
      {"transpose", {3, 4}, [](const Tensor& x, Rng&) { return transpose(x); }},
      {"add", {3, 4}, [](const Tensor& x, Rng& r) { return add(x, random_tensor({3, 4}, r)); }},
      {"add_bias", {4}, [](const Tensor& x, Rng& r) { return add(random_tensor({3, 4}, r), x); }},
      {"sub", {3, 4}, [](const Tensor& x, Rng& r) { return sub(random_tensor({3, 4}, r), x); }},
      {"mul", {3, 4}, [](const Tensor& x, Rng& r) { return mul(x, random_tensor({3, 4}, r)); }},
      {"mul_self", {3, 4}, [](const Tensor& x, Rng&) { return mul(x, x); }},
      {"scale", {3, 4}, [](const Tensor& x, Rng&) { return scale(x, -1.7); }},
      {"concat_rows", {2, 4}, [](const Tensor& x, Rng& r) { return concat({random_tensor({1, 4}, r), x}, 0); }},
      {"concat_cols", {3, 2}, [](const Tensor& x, Rng& r) { return concat({x, random_tensor({3, 3}, r), x}, 1); }},
      {"slice_rows", {5, 3}, [](const Tensor& x, Rng&) { return slice(x, 0, 1, 3); }},
      {"slice_cols", {3, 5}, [](const Tensor& x, Rng&) { return slice(x, 1, 2, 2); }},
      {"sum", {3, 4}, [](const Tensor& x, Rng&) { return sum(x); }},
      {"mean", {3, 4}, [](const Tensor& x, Rng&) { return mean(x); }},
      {"softmax_rows", {3, 4}, [](const Tensor& x, Rng&) { return softmax(x, 1); }},
      {"softmax_cols", {3, 4}, [](const Tensor& x, Rng&) { return softmax(x, 0); }},
      {"log_softmax", {3, 4}, [](const Tensor& x, Rng&) { return log_softmax(x, 1); }},
      {"log_softmax_masked", {3, 4},
       [](const Tensor& x, Rng&) {
         return log_softmax_masked(x, {1, 0, 1, 1, 1, 1, 0, 1, 0, 1, 1, 1});
       }},
      {"layer_norm_x", {3, 6},
       [](const Tensor& x, Rng& r) { return layer_norm(x, random_tensor({6}, r), random_tensor({6}, r)); }},
      {"layer_norm_gain", {6},
       [](const Tensor& g, Rng& r) { return layer_norm(random_tensor({3, 6}, r), g, random_tensor({6}, r)); }},
      {"layer_norm_bias", {6},
       [](const Tensor& b, Rng& r) { return layer_norm(random_tensor({3, 6}, r), random_tensor({6}, r), b); }},
      {"embedding_gather", {5, 3}, [](const Tensor& t, Rng&) { return embedding_gather(t, {4, 0, 4, 2}); }},
      {"take_along_rows", {3, 4}, [](const Tensor& x, Rng&) { return take_along_rows(x, {0, 3, 3, 1, 2, 2}, 2); }},
      {"l2_normalize_rows", {3, 4}, [](const Tensor& x, Rng&) { return l2_normalize_rows(x); }},
      {"cosine_similarity", {5}, [](const Tensor& x, Rng& r) { return cosine_similarity(x, random_tensor({5}, r)); }},
      {"cosine_matrix_lhs", {3, 4}, [](const Tensor& x, Rng& r) { return cosine_matrix(x, random_tensor({2, 4}, r)); }},
      {"cosine_matrix_rhs", {2, 4}, [](const Tensor& x, Rng& r) { return cosine_matrix(random_tensor({3, 4}, r), x); }},
      {"relu", {3, 4}, [](const Tensor& x, Rng&) { return relu(x); }},
      {"gelu", {3, 4}, [](const Tensor& x, Rng&) { return gelu(x); }},
      {"log", {3, 4}, [](const Tensor& x, Rng&) { return log(x); }, 0.5, 2.0},
  };
}

// Wraps a case so the random auxiliary tensors are drawn once and reused by
// every evaluation of the function.
double check_op(const OpCase& c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor(c.shape, rng, c.lo, c.hi);
  const std::uint64_t aux_seed = rng();
  return grad_check(
      [&](const Tensor& in) {
        Rng aux(aux_seed);
        Tensor y = c.fn(in, aux);
        return project(y, aux);
      },
      x);
}

struct CompositeFixture {
  Model model;
  EncodedPair pair;
  Tensor head;
};

CompositeFixture make_fixture(std::uint64_t seed) {
  SynthSpec spec;
  spec.events_per_class = 1;
  spec.min_posts = 3;
  spec.max_posts = 5;
  spec.vocab_size = 20;
  spec.seed = seed;
  const auto events = generate_synthetic(spec);
  EncoderConfig config;
  config.d = 8;
  config.heads = 2;
  config.layers = 3;
  config.syn_layers = 1;
  config.max_len = 40;
  config.init_std = 0.3;  // larger than the training default so the bias terms matter
  Model model(config, Vocab::build(events), seed);
  EncodedPair pair = model.encode(events[0], RankStrategy::breadth_first);
  Rng rng(seed * 31 + 7);
  Tensor head = random_tensor({1, config.d}, rng);
  return {std::move(model), std::move(pair), head};
}

}  // namespace

std::vector<GradCheckResult> run_grad_suite(std::uint64_t first_seed, std::size_t seeds) {
  PrecisionScope f64(Precision::f64);
  std::vector<GradCheckResult> results;
  const auto cases = op_cases();
  for (std::uint64_t seed = first_seed; seed < first_seed + seeds; ++seed) {
    for (const OpCase& c : cases) results.push_back({c.name, false, seed, check_op(c, seed), kOpTolerance});

    CompositeFixture fx = make_fixture(seed);
    const Model& model = fx.model;
    const EncodedPair& pair = fx.pair;
    const Tensor normalized = model.normalize(pair).detach();
    auto scalar_head = [&](const Tensor& input) {
      return sum(mul(model.sem_encode(input, pair).mask_state, fx.head));
    };
    auto through_model = [&](const Tensor&) {
      return sum(mul(model.sem_encode(model.normalize(pair), pair).mask_state, fx.head));
    };
    results.push_back({"sem_encoder_input", true, seed, grad_check(scalar_head, normalized), kCompositeTolerance});
    Tensor relation = model.relation_table();
    results.push_back({"sem_encoder_relation_table", true, seed, grad_check(through_model, relation),
                       kCompositeTolerance});
    Tensor depth = model.abs_position_table();
    results.push_back({"sem_encoder_abs_position", true, seed, grad_check(through_model, depth), kCompositeTolerance});
    Tensor wq = fx.model.params().get("sem.layer1.wq").tensor;
    results.push_back({"sem_encoder_query_weights", true, seed, grad_check(through_model, wq), kCompositeTolerance});
    Tensor norm_gain = fx.model.params().get("norm.g").tensor;
    results.push_back({"sem_encoder_norm_gain", true, seed, grad_check(through_model, norm_gain),
                       kCompositeTolerance});

    Rng rng(seed ^ 0x5bd1e995);
    const std::vector<Label> labels{Label::rumor, Label::non_rumor, Label::rumor, Label::non_rumor, Label::rumor};
    Tensor states = random_tensor({5, 6}, rng);
    Tensor protos = random_tensor({2, 6}, rng);
    results.push_back({"proto_loss_states", true, seed,
                       grad_check([&](const Tensor& s) { return proto_loss(s, labels, protos, 0.5); }, states),
                       kCompositeTolerance});
    results.push_back({"proto_loss_prototypes", true, seed,
                       grad_check([&](const Tensor& p) { return proto_loss(states, labels, p, 0.5); }, protos),
                       kCompositeTolerance});
    results.push_back({"contrastive_loss", true, seed,
                       grad_check([&](const Tensor& s) { return contrastive_loss(s, labels, 0.5); }, states),
                       kCompositeTolerance});
    results.push_back({"joint_loss", true, seed,
                       grad_check(
                           [&](const Tensor& s) {
                             return joint_loss(proto_loss(s, labels, protos, 1.0), contrastive_loss(s, labels, 1.0), 0.5);
                           },
                           states),
                       kCompositeTolerance});
  }
  return results;
}

}  // namespace rpl
