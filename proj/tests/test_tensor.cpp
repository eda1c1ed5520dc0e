#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "rpl/error.hpp"
#include "rpl/grad_check.hpp"
#include "rpl/grad_suite.hpp"
#include "rpl/optimizer.hpp"
#include "rpl/parameters.hpp"
#include "rpl/tensor.hpp"

using namespace rpl;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = n(rng);
  return Tensor::from({r, c}, v);
}

}  // namespace

TEST(Tensor, MatmulMatchesNaiveLoops) {
  PrecisionScope f64(Precision::f64);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng() % 6, k = 1 + rng() % 6, n = 1 + rng() % 6;
    const Tensor a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
    const Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{m, n}));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
        ASSERT_NEAR(c.at(i, j), acc, 1e-12);
      }
    }
  }
}

TEST(Tensor, SquareGradient) {
  PrecisionScope f64(Precision::f64);
  Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
  sum(mul(x, x)).backward();
  ASSERT_EQ(x.grad().size(), 3u);
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  EXPECT_EQ(x.grad()[2], 6.0);
}

TEST(Tensor, LeafGradientsAccumulate) {
  PrecisionScope f64(Precision::f64);
  Tensor x = Tensor::from({2}, {1.0, -1.0}, true);
  sum(scale(x, 3.0)).backward();
  sum(scale(x, 3.0)).backward();
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  sum(x).backward();
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Tensor, BackwardNeedsScalar) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  try {
    scale(x, 2.0).backward();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotScalarOutput);
  }
}

TEST(Tensor, ShapeMismatchIsReported) {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  EXPECT_THROW(add(a, Tensor::zeros({3, 2})), Error);
  EXPECT_THROW(mul(a, Tensor::zeros({6})), Error);
  EXPECT_THROW(slice(a, 1, 2, 2), Error);
  EXPECT_THROW(concat({a, Tensor::zeros({2, 2})}, 0), Error);
}

TEST(Tensor, ZeroRowCannotBeNormalized) {
  const Tensor a = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 0.0});
  try {
    l2_normalize_rows(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(Tensor, NoGradScopeBuildsNoGraph) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y;
  {
    NoGradScope no_grad;
    y = sum(mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Tensor, SingleModeRoundsEveryResult) {
  PrecisionScope f32(Precision::f32);
  const Tensor a = Tensor::from({1, 3}, {0.1, 1.0 / 3.0, std::acos(-1.0)});
  const Tensor b = softmax(scale(a, 1.7), 1);
  for (double v : b.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  PrecisionScope f64(Precision::f64);
  const Tensor c = scale(Tensor::from({1}, {1.0 / 3.0}), 1.0);
  EXPECT_NE(c.item(), static_cast<double>(static_cast<float>(c.item())));
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  PrecisionScope f64(Precision::f64);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = scale(random_matrix(3, 5, rng), 30.0);  // large logits stay stable
    const Tensor s = softmax(a, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        ASSERT_GE(s.at(r, c), 0.0);
        total += s.at(r, c);
      }
      ASSERT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Tensor, LayerNormRowsHaveZeroMeanUnitVariance) {
  PrecisionScope f64(Precision::f64);
  std::mt19937_64 rng(9);
  const Tensor x = random_matrix(4, 8, rng);
  const Tensor y = layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}), 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 8; ++c) mean += y.at(r, c) / 8.0;
    for (std::size_t c = 0; c < 8; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 8.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-12);
  }
}

TEST(Tensor, GradCheckCatchesAWrongGradient) {
  PrecisionScope f64(Precision::f64);
  // An op whose backward pretends the derivative is 1 while the forward squares.
  auto broken = [](const Tensor& x) {
    std::vector<double> v(x.data().begin(), x.data().end());
    for (double& e : v) e = e * e;
    Tensor y = make_op_result(x.shape(), v, {x}, [](detail::Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    return sum(y);
  };
  EXPECT_GT(grad_check(broken, Tensor::from({3}, {0.7, -1.3, 2.0})), 0.1);
}

TEST(GradSuite, AllOpsAndCompositesPass) {
  const auto results = run_grad_suite(100, 2);
  ASSERT_FALSE(results.empty());
  std::size_t composites = 0;
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed()) << r.name << " seed " << r.seed << " err " << r.error;
    composites += r.composite;
  }
  EXPECT_GT(composites, 0u);
}

TEST(Parameters, FrozenParametersTakeNoGradient) {
  ParameterStore store;
  std::mt19937_64 rng(1);
  Tensor frozen = store.add_normal("f", {2, 2}, 1.0, rng, true);
  Tensor live = store.add_normal("l", {2, 2}, 1.0, rng);
  sum(mul(matmul(frozen, live), matmul(frozen, live))).backward();
  EXPECT_FALSE(frozen.has_grad());
  EXPECT_TRUE(live.has_grad());
  EXPECT_EQ(store.trainable_count(), 4u);
}

TEST(Parameters, ChecksumTracksValues) {
  ParameterStore store;
  std::mt19937_64 rng(1);
  Tensor frozen = store.add_normal("f", {3}, 1.0, rng, true);
  Tensor live = store.add_normal("l", {3}, 1.0, rng);
  const auto frozen_sum = store.checksum(true), all_sum = store.checksum(false);
  live.mutable_data()[0] += 1.0;
  EXPECT_EQ(store.checksum(true), frozen_sum);
  EXPECT_NE(store.checksum(false), all_sum);
  frozen.mutable_data()[1] += 1.0;
  EXPECT_NE(store.checksum(true), frozen_sum);
}

TEST(Parameters, SnapshotRestore) {
  ParameterStore store;
  std::mt19937_64 rng(2);
  Tensor p = store.add_normal("p", {4}, 1.0, rng);
  const auto snap = store.snapshot();
  const double first = p.at(0);
  p.mutable_data()[0] = 42.0;
  store.restore(snap);
  EXPECT_EQ(p.at(0), first);
}

TEST(Checkpoint, RoundTripAndLayout) {
  PrecisionScope f32(Precision::f32);
  ParameterStore store;
  std::mt19937_64 rng(3);
  store.add_normal("a.weight", {2, 3}, 1.0, rng);
  store.add_constant("b", {4}, 0.25, true);
  for (auto& p : store.all())
    for (double& v : p.tensor.mutable_data()) v = static_cast<float>(v);
  const auto path = (std::filesystem::temp_directory_path() / "rpl_ckpt_test.bin").string();
  const std::string header = R"({"format":"test"})";
  save_checkpoint(path, header, store);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("RPLCKPT\0", 8));
  std::uint32_t version = 0, header_len = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&header_len, bytes.data() + 12, 4);
  EXPECT_EQ(version, kCheckpointVersion);
  EXPECT_EQ(header_len, header.size());
  EXPECT_EQ(bytes.substr(16, header.size()), header);
  // count + 2 x (name_len, name, rank, extents) + float payloads
  const std::size_t expected = 16 + header.size() + 4 + (4 + 8 + 4 + 8 + 6 * 4) + (4 + 1 + 4 + 4 + 4 * 4);
  EXPECT_EQ(bytes.size(), expected);

  const CheckpointFile file = load_checkpoint(path);
  EXPECT_EQ(file.header_json, header);
  ParameterStore other;
  std::mt19937_64 rng2(99);
  other.add_normal("a.weight", {2, 3}, 1.0, rng2);
  other.add_constant("b", {4}, 0.0, true);
  apply_checkpoint(file, other);
  EXPECT_EQ(other.snapshot(), store.snapshot());

  ParameterStore wrong;
  wrong.add_constant("a.weight", {3, 2}, 0.0);
  wrong.add_constant("b", {4}, 0.0);
  EXPECT_THROW(apply_checkpoint(file, wrong), Error);

  {
    std::ofstream corrupt(path, std::ios::binary);
    corrupt << "NOTACKPT";
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadCheckpoint);
  }
  std::filesystem::remove(path);
}

TEST(AdamW, HandUnrolledThreeSteps) {
  PrecisionScope f64(Precision::f64);
  ParameterStore store;
  Tensor w = store.add("w", {1}, {0.5});
  const AdamWConfig cfg{.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.01};
  AdamW opt(cfg);
  // Loss w^3 gives gradient 3 w^2 at each step.
  double p = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    store.zero_grad();
    sum(mul(mul(w, w), w)).backward();
    opt.step(store);

    const double g = 3.0 * p * p;
    p -= cfg.lr * cfg.weight_decay * p;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(cfg.beta1, t));
    const double vhat = v / (1.0 - std::pow(cfg.beta2, t));
    p -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    EXPECT_NEAR(w.item(), p, 1e-10) << "step " << t;
  }
  EXPECT_EQ(opt.steps(), 3u);
}

TEST(AdamW, ZeroGradientNoDecayLeavesParameters) {
  PrecisionScope f64(Precision::f64);
  ParameterStore store;
  Tensor w = store.add("w", {3}, {1.0, -2.0, 0.5});
  w.mutable_grad();
  AdamW opt(AdamWConfig{.lr = 0.1, .weight_decay = 0.0});
  for (int i = 0; i < 3; ++i) opt.step(store);
  EXPECT_EQ(w.at(0), 1.0);
  EXPECT_EQ(w.at(1), -2.0);
  EXPECT_EQ(w.at(2), 0.5);
}

TEST(AdamW, FrozenParameterUnchanged) {
  PrecisionScope f64(Precision::f64);
  ParameterStore store;
  Tensor f = store.add("f", {2}, {1.0, 2.0}, true);
  auto g = f.mutable_grad();
  g[0] = 5.0;
  g[1] = -5.0;
  AdamW opt(AdamWConfig{.lr = 0.1, .weight_decay = 0.5});
  opt.step(store);
  EXPECT_EQ(f.at(0), 1.0);
  EXPECT_EQ(f.at(1), 2.0);
}
