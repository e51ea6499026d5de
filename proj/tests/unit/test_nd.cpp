#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "meshssm/error.hpp"
#include "meshssm/nd/ops.hpp"
#include "meshssm/nd/optim.hpp"
#include "meshssm/nd/random.hpp"
#include "meshssm/nd/tensor.hpp"
#include "test_support.hpp"

using namespace meshssm;
using namespace meshssm::nd;
using meshssm::testing::check_gradients;
using meshssm::testing::random_tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor::from({2, 3}, std::vector<double>(5)), DimensionError);
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
}

TEST(Tensor, NonFiniteForwardValueIsAnError) {
  auto x = Tensor::from({2}, {1000.0, 1.0}, true);
  EXPECT_THROW(nd::exp(x), NumericError);
  auto big = Tensor::from({1}, {std::numeric_limits<double>::max()});
  EXPECT_THROW(scale(big, 10.0), NumericError);
}

TEST(Matmul, IdentityTimesA) {
  nd::Rng rng(1);
  auto a = random_tensor({3, 3}, rng);
  auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(values(matmul(eye, a)), values(a));
}

TEST(Matmul, HandComputed) {
  auto out = matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 1}, {1, 1}));
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(values(out), (std::vector<double>{3, 7}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  nd::Rng rng(2);
  auto a = random_tensor({5, 4}, rng);
  auto b = random_tensor({4, 3}, rng, -1, 1, false);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (std::size_t c = 0; c < 3; ++c) expect += b.at(j, c);
      EXPECT_NEAR(a.grad()[i * 4 + j], expect, 1e-12);
    }
  auto check = check_gradients([&] { return sum(matmul(a, b)); }, {a}, 1e-5, 1e-3);
  EXPECT_LE(check.max_error, 1e-6);
}

TEST(LeakyRelu, Definition) {
  auto x = Tensor::from({3}, {3.0, -1.0, -2.0}, true);
  auto y = leaky_relu(x, 0.2);
  EXPECT_DOUBLE_EQ(y[0], 3.0);
  EXPECT_DOUBLE_EQ(y[1], -0.2);
  sum(y).backward();
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.2);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(LeakyRelu, SubgradientAtZeroIsSlope) {
  auto x = Tensor::from({1}, {0.0}, true);
  sum(leaky_relu(x, 0.2)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.2);
}

TEST(SetPooling, MaxAndMean) {
  EXPECT_EQ(values(reduce_max_over_set(Tensor::from({2, 2}, {1, 5, 3, 2}))), (std::vector<double>{3, 5}));
  EXPECT_EQ(values(reduce_mean_over_set(Tensor::from({2, 2}, {1, 5, 3, 1}))), (std::vector<double>{2, 3}));
  auto row = Tensor::from({1, 3}, {4, -1, 2});
  EXPECT_EQ(values(reduce_max_over_set(row)), values(row));
  EXPECT_EQ(values(reduce_mean_over_set(row)), values(row));
}

TEST(SetPooling, RowPermutationInvariant) {
  nd::Rng rng(3);
  auto x = random_tensor({7, 4}, rng, -1, 1, false);
  const auto perm = meshssm::testing::random_permutation(7, rng);
  std::vector<double> permuted;
  for (auto r : perm)
    for (std::size_t c = 0; c < 4; ++c) permuted.push_back(x.at(r, c));
  auto px = Tensor::from({7, 4}, permuted);
  EXPECT_EQ(values(reduce_max_over_set(x)), values(reduce_max_over_set(px)));
  // Mean sums in a different order, so only near-equality is guaranteed.
  const auto m0 = values(reduce_mean_over_set(x)), m1 = values(reduce_mean_over_set(px));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(m0[c], m1[c], 1e-15);
}

TEST(SetPooling, MaxTieRoutesGradientToLowestRow) {
  auto x = Tensor::from({3, 1}, {2.0, 2.0, 1.0}, true);
  sum(reduce_max_over_set(x)).backward();
  EXPECT_EQ(values(Tensor::from({3}, {x.grad()[0], x.grad()[1], x.grad()[2]})), (std::vector<double>{1, 0, 0}));
}

TEST(SetPooling, EmptySetIsAnError) {
  EXPECT_THROW(segment_max(Tensor::zeros({0, 2}), 0), Error);
}

TEST(SetPooling, MeanGradientIsOneOverN) {
  nd::Rng rng(4);
  auto x = random_tensor({4, 2}, rng);
  sum(reduce_mean_over_set(x)).backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(BatchNorm, EvalWithDefaultStatsIsIdentity) {
  nd::Rng rng(5);
  auto x = random_tensor({6, 3}, rng, -1, 1, false);
  BatchNorm bn(3);
  bn.eps = 0.0;
  EXPECT_EQ(values(batch_norm(x, bn, Mode::eval)), values(x));
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  nd::Rng rng(6);
  auto x = random_tensor({50, 3}, rng, -3, 5, false);
  BatchNorm bn(3);
  auto y = batch_norm(x, bn, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 50; ++i) m += y.at(i, c);
    m /= 50;
    for (std::size_t i = 0; i < 50; ++i) v += (y.at(i, c) - m) * (y.at(i, c) - m);
    v /= 50;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-3);
  }
}

TEST(BatchNorm, TrainModeNeedsTwoRows) {
  BatchNorm bn(2);
  EXPECT_THROW(batch_norm(Tensor::zeros({1, 2}), bn, Mode::train), ValidationError);
}

TEST(BatchNorm, RunningStatsFollowMomentumRecursion) {
  auto x = Tensor::from({4, 1}, {1.0, 2.0, 3.0, 6.0});
  const double mean = 3.0, unbiased = (4.0 + 1.0 + 0.0 + 9.0) / 3.0;
  BatchNorm bn(1);
  for (int t = 1; t <= 20; ++t) {
    batch_norm(x, bn, Mode::train);
    const double keep = std::pow(1.0 - bn.momentum, t);
    EXPECT_NEAR(bn.running_mean[0], mean * (1 - keep), 1e-12);
    EXPECT_NEAR(bn.running_var[0], keep + unbiased * (1 - keep), 1e-12);
  }
}

TEST(Backward, SumAndSquare) {
  auto x = Tensor::from({4}, {1, 2, 3, 4}, true);
  sum(x).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1, 1}));
  auto y = Tensor::from({2}, {1, 2}, true);
  sum(mul(y, y)).backward();
  EXPECT_EQ(std::vector<double>(y.grad().begin(), y.grad().end()), (std::vector<double>{2, 4}));
}

TEST(Backward, NonScalarLossIsAnError) {
  auto x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(scale(x, 2.0).backward(), DimensionError);
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto loss = [&] { return sum(square(x)); };
  loss().backward();
  loss().backward();
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
  x.zero_grad();
  loss().backward();
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Backward, RepeatedPassesAreDeterministic) {
  nd::Rng rng(7);
  auto w = random_tensor({4, 3}, rng);
  auto x = random_tensor({5, 4}, rng, -1, 1, false);
  auto loss = [&] { return mean(square(leaky_relu(matmul(x, w), 0.2))); };
  loss().backward();
  const std::vector<double> first(w.grad().begin(), w.grad().end());
  w.zero_grad();
  loss().backward();
  EXPECT_EQ(first, std::vector<double>(w.grad().begin(), w.grad().end()));
}

TEST(Backward, SharedSubgraphVisitedOnce) {
  auto x = Tensor::from({1}, {3.0}, true);
  auto y = square(x);
  sum(add(y, y)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(NoGrad, GuardStopsRecording) {
  auto x = Tensor::from({1}, {3.0}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(square(x).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(square(x).requires_grad());
}

TEST(GradCheck, TwoLayerMlp) {
  nd::Rng rng(8);
  auto x = random_tensor({6, 4}, rng, -1, 1, false);
  auto w1 = random_tensor({4, 5}, rng), b1 = random_tensor({5}, rng);
  auto w2 = random_tensor({5, 2}, rng), b2 = random_tensor({2}, rng);
  auto f = [&] { return mean(square(linear(leaky_relu(linear(x, w1, b1), 0.2), w2, b2))); };
  auto check = check_gradients(f, {w1, b1, w2, b2});
  EXPECT_LE(check.max_error, 1e-4);
  EXPECT_EQ(check.checked, 20u + 5 + 10 + 2);
}

TEST(GradCheck, ElementwiseAndShapeOps) {
  nd::Rng rng(9);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), c = random_tensor({2, 4}, rng);
  auto f = [&] {
    auto h = add(mul(a, b), scale(sub(a, b), 0.3));
    h = add_scalar(nd::exp(clamp(h, -0.9, 0.9)), -1.0);
    auto rows = concat_rows({h, c});
    auto cols = concat_cols({slice_rows(rows, 1, 3), repeat_rows(slice_rows(c, 0, 1), 3)});
    auto tiled = tile_rows(reshape(cols, {3, 8}), 2);
    return add(mean(square(tiled)), mse(a, b));
  };
  EXPECT_LE(check_gradients(f, {a, b, c}).max_error, 1e-4);
}

TEST(GradCheck, SegmentPooling) {
  nd::Rng rng(10);
  auto x = random_tensor({12, 3}, rng);
  auto f = [&] { return sum(square(concat_cols({segment_max(x, 4), segment_mean(x, 4)}))); };
  EXPECT_LE(check_gradients(f, {x}).max_error, 1e-4);
}

TEST(GradCheck, BatchNormBothModes) {
  nd::Rng rng(11);
  auto x = random_tensor({8, 3}, rng);
  BatchNorm bn(3);
  bn.gamma = random_tensor({3}, rng, 0.5, 1.5);
  bn.beta = random_tensor({3}, rng);
  auto w = random_tensor({3, 3}, rng, -1, 1, false);
  for (Mode mode : {Mode::train, Mode::eval}) {
    bn.running_mean = {0.1, -0.2, 0.3};
    bn.running_var = {0.5, 1.5, 2.0};
    auto f = [&] { return sum(square(matmul(batch_norm(x, bn, mode), w))); };
    EXPECT_LE(check_gradients(f, {x, bn.gamma, bn.beta}).max_error, 1e-4);
  }
}

TEST(GradCheck, EdgeLinear) {
  nd::Rng rng(12);
  const std::size_t n = 6, k = 2;
  auto x = random_tensor({n, 3}, rng);
  auto w = random_tensor({6, 4}, rng), b = random_tensor({4}, rng);
  std::vector<std::uint32_t> nbr(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) nbr[i * k + r] = static_cast<std::uint32_t>((i + r + 1) % n);
  auto f = [&] { return sum(square(edge_linear(x, nbr, k, w, b))); };
  EXPECT_LE(check_gradients(f, {x, w, b}).max_error, 1e-4);
}

TEST(EdgeLinear, MatchesPerEdgeLoop) {
  nd::Rng rng(13);
  const std::size_t n = 5, k = 3, d = 2, out = 4;
  auto x = random_tensor({n, d}, rng, -1, 1, false);
  auto w = random_tensor({2 * d, out}, rng, -1, 1, false), b = random_tensor({out}, rng, -1, 1, false);
  std::vector<std::uint32_t> nbr;
  for (std::size_t i = 0; i < n * k; ++i) nbr.push_back(static_cast<std::uint32_t>(rng.index(n)));
  auto y = edge_linear(x, nbr, k, w, b);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = nbr[i * k + r];
      for (std::size_t c = 0; c < out; ++c) {
        double v = b[c];
        for (std::size_t q = 0; q < d; ++q)
          v += x.at(i, q) * w.at(q, c) + (x.at(j, q) - x.at(i, q)) * w.at(d + q, c);
        EXPECT_NEAR(y.at(i * k + r, c), v, 1e-12);
      }
    }
}

class EdgeConvFusion : public ::testing::TestWithParam<Mode> {};

TEST_P(EdgeConvFusion, MatchesUnfusedChainBitForBit) {
  const Mode mode = GetParam();
  nd::Rng rng(14);
  const std::size_t n = 20, k = 4, d = 5, out = 7;
  auto x1 = random_tensor({n, d}, rng);
  auto w1 = random_tensor({2 * d, out}, rng), b1 = random_tensor({out}, rng);
  std::vector<std::uint32_t> nbr;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) nbr.push_back(static_cast<std::uint32_t>((i + 1 + rng.index(n - 1)) % n));
  BatchNorm bn1(out);
  bn1.gamma = random_tensor({out}, rng, 0.5, 1.5);
  bn1.beta = random_tensor({out}, rng);
  bn1.running_mean.assign(out, 0.2);
  bn1.running_var.assign(out, 0.7);
  auto x2 = x1.clone().set_requires_grad(true);
  auto w2 = w1.clone().set_requires_grad(true), b2 = b1.clone().set_requires_grad(true);
  BatchNorm bn2 = bn1;
  bn2.gamma = bn1.gamma.clone().set_requires_grad(true);
  bn2.beta = bn1.beta.clone().set_requires_grad(true);

  auto target = random_tensor({n, out}, rng, -1, 1, false);
  auto fused = edge_conv(x1, nbr, k, w1, b1, bn1, mode, 0.2);
  auto chain = segment_max(leaky_relu(batch_norm(edge_linear(x2, nbr, k, w2, b2), bn2, mode), 0.2), k);
  EXPECT_EQ(values(fused), values(chain));
  EXPECT_EQ(bn1.running_mean, bn2.running_mean);
  EXPECT_EQ(bn1.running_var, bn2.running_var);
  mse(fused, target).backward();
  mse(chain, target).backward();
  auto grads = [](const Tensor& t) { return std::vector<double>(t.grad().begin(), t.grad().end()); };
  EXPECT_EQ(grads(x1), grads(x2));
  EXPECT_EQ(grads(w1), grads(w2));
  EXPECT_EQ(grads(b1), grads(b2));
  EXPECT_EQ(grads(bn1.gamma), grads(bn2.gamma));
  EXPECT_EQ(grads(bn1.beta), grads(bn2.beta));
}

INSTANTIATE_TEST_SUITE_P(Modes, EdgeConvFusion, ::testing::Values(Mode::train, Mode::eval));

TEST(GradCheck, EdgeConvFused) {
  nd::Rng rng(15);
  const std::size_t n = 8, k = 3, d = 3, out = 4;
  auto x = random_tensor({n, d}, rng);
  auto w = random_tensor({2 * d, out}, rng), b = random_tensor({out}, rng);
  std::vector<std::uint32_t> nbr;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) nbr.push_back(static_cast<std::uint32_t>((i + 1 + r * 2) % n));
  BatchNorm bn(out);
  bn.gamma = random_tensor({out}, rng, 0.5, 1.5);
  bn.beta = random_tensor({out}, rng);
  auto target = random_tensor({n, out}, rng, -1, 1, false);
  for (Mode mode : {Mode::train, Mode::eval}) {
    auto keep_mean = bn.running_mean, keep_var = bn.running_var;
    auto f = [&] {
      bn.running_mean = keep_mean;
      bn.running_var = keep_var;
      return mse(edge_conv(x, nbr, k, w, b, bn, mode, 0.2), target);
    };
    EXPECT_LE(check_gradients(f, {x, w, b, bn.gamma, bn.beta}).max_error, 1e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = Tensor::from({3}, {1, 2, 3}, true);
  std::vector<Tensor> params{p};
  auto state = make_adam_state(params, 0.1);
  sum(scale(p, 0.0)).backward();
  adam_step(params, state);
  EXPECT_EQ(values(p), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = Tensor::from({2}, {1.0, -1.0}, true);
  std::vector<Tensor> params{p};
  auto state = make_adam_state(params, 0.01);
  sum(mul(p, Tensor::from({2}, {3.0, -0.5}))).backward();
  adam_step(params, state);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p[1], -1.0 + 0.01, 1e-9);
}

TEST(Adam, QuadraticMatchesScalarReference) {
  auto p = Tensor::from({1}, {1.0}, true);
  std::vector<Tensor> params{p};
  auto state = make_adam_state(params, 0.1);
  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    zero_grads(params);
    sum(square(p)).backward();
    adam_step(params, state);
    const double g = 2 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p[0], w, 1e-12);
  }
  EXPECT_LT(std::abs(p[0]), 0.1);
  EXPECT_EQ(state.step, 100u);
}

TEST(Adam, MomentShapeMismatchIsAnError) {
  auto p = Tensor::from({2}, {1, 2}, true);
  std::vector<Tensor> params{p};
  auto state = make_adam_state(params, 0.1);
  state.first_moment[0].resize(3);
  EXPECT_THROW(adam_step(params, state), DimensionError);
}

TEST(StepLR, ScheduleIsNonIncreasingFromBase) {
  StepLRSchedule s{0.01, 200, 0.5};
  EXPECT_DOUBLE_EQ(s.lr(0), 0.01);
  EXPECT_DOUBLE_EQ(s.lr(199), 0.01);
  EXPECT_DOUBLE_EQ(s.lr(200), 0.005);
  EXPECT_DOUBLE_EQ(s.lr(999), 0.01 * 0.0625);
  for (std::size_t e = 1; e < 1000; ++e) {
    EXPECT_LE(s.lr(e), s.lr(e - 1));
    EXPECT_GT(s.lr(e), 0.0);
  }
  EXPECT_THROW((StepLRSchedule{0.01, 0, 0.5}.validate()), ValidationError);
  EXPECT_THROW((StepLRSchedule{0.01, 10, 1.5}.validate()), ValidationError);
}

TEST(Rng, StateRoundTripsThroughText) {
  nd::Rng a(42);
  for (int i = 0; i < 10; ++i) a.normal();
  nd::Rng b;
  b.deserialize(a.serialize());
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, UniformAndIndexRanges) {
  nd::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.index(7), 7u);
  }
}
