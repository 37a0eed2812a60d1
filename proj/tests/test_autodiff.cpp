#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "iucl/adam.hpp"
#include "iucl/autodiff.hpp"

using namespace iucl;
using namespace iucl::ad;

namespace {

Tensor random_tensor(Tensor::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.storage()) v = u(rng);
  return t;
}

// Scalarizes an op by a fixed random weighting so every output coordinate
// reaches the gradient.
Var weighted(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(out.value().shape(), rng);
  return sum(mul(out, out.tape().constant(std::move(w))));
}

}  // namespace

TEST(Tape, SquareAtThree) {
  Tape t;
  Var x = t.leaf(Tensor::scalar(3.0));
  Var f = mul(x, x);
  t.backward(f);
  EXPECT_DOUBLE_EQ(f.value().item(), 9.0);
  EXPECT_DOUBLE_EQ(t.grad(x).item(), 6.0);
}

TEST(Tape, SumOfProductGradientIsOtherFactor) {
  Tape t;
  Var x = t.leaf(Tensor::vector({1, 2, 3}));
  Var y = t.leaf(Tensor::vector({-4, 5, 0.5}));
  t.backward(sum(mul(x, y)));
  EXPECT_EQ(t.grad(x), y.value());
  EXPECT_EQ(t.grad(y), x.value());
}

TEST(Tape, Errors) {
  {
    Tape t;
    Var x = t.leaf(Tensor::vector({1, 2}));
    EXPECT_THROW(t.backward(x), NonScalarRootError);
  }
  {
    Tape t;
    Var x = t.leaf(Tensor::scalar(2.0));
    Var f = mul(x, x);
    t.backward(f);
    EXPECT_THROW(t.backward(f), TapeReusedError);
  }
  {
    Tape t;
    Var x = t.leaf(Tensor::vector({1, 2}));
    Var y = t.leaf(Tensor::vector({1, 2, 3}));
    EXPECT_THROW(add(x, y), ShapeError);
    EXPECT_THROW(matmul(t.leaf(Tensor({2, 3})), t.leaf(Tensor({2, 3}))), ShapeError);
    EXPECT_THROW(log(t.leaf(Tensor::vector({-1.0}))), NonFiniteError);
    EXPECT_THROW(exp(t.leaf(Tensor::vector({1000.0}))), NonFiniteError);
  }
}

TEST(Tape, EachPullbackRunsOnce) {
  Tape t;
  Var x = t.leaf(Tensor::vector({0.3, -0.2}));
  Var a = exp(x);
  Var b = mul(a, a);
  Var c = add(b, a);
  Var f = sum(c);
  t.backward(f);
  EXPECT_EQ(t.pullbacks_run(), 4u);  // exp, mul, add, sum
  EXPECT_EQ(t.size(), 5u);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape t;
  Var x = t.leaf(Tensor::scalar(2.0));
  Var k = t.constant(Tensor::scalar(5.0));
  t.backward(mul(x, k));
  EXPECT_DOUBLE_EQ(t.grad(x).item(), 5.0);
  EXPECT_DOUBLE_EQ(t.grad(k).item(), 0.0);
}

TEST(Kinks, SubgradientZero) {
  Tape t;
  Var x = t.leaf(Tensor::vector({0.0, 0.0, 0.0}));
  Var f = add(add(sum(abs(x)), sum(relu(x))), sum(max_with_scalar(x, 0.0)));
  t.backward(f);
  for (double g : t.grad(x).data()) EXPECT_EQ(g, 0.0);
}

TEST(Softmax, ShiftedForm) {
  Tape t;
  Var s = softmax(t.leaf(Tensor::vector({100, 0, 0, 0, 0})));
  EXPECT_NEAR(s.value()[0], 1.0, 1e-9);
  const double tail = 1.0 / (std::exp(100.0) + 4.0);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(s.value()[i], tail, 1e-50);
}

TEST(Softmax, RowsSumToOneForLargeInputs) {
  std::mt19937_64 rng(11);
  Tape t;
  Var s = softmax(t.leaf(random_tensor({50, 5}, rng, -1e4, 1e4)));
  for (std::size_t r = 0; r < 50; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_GE(s.value().at(r, c), 0.0);
      total += s.value().at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Gradcheck, QuadraticIsExact) {
  std::mt19937_64 rng(2);
  const auto f = [](Tape&, std::span<const Var> p) { return sum(mul(p[0], p[0])); };
  EXPECT_LT(gradcheck(f, {random_tensor({7}, rng)}).max_rel_error, 1e-9);
}

TEST(Gradcheck, EveryPrimitive) {
  std::mt19937_64 rng(7);
  struct Case {
    const char* name;
    ScalarFn f;
    std::vector<Tensor> point;
  };
  auto away_from_zero = [&](Tensor::Shape s) {
    Tensor t = random_tensor(std::move(s), rng, 0.2, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (double& v : t.storage())
      if (flip(rng)) v = -v;
    return t;
  };
  const std::vector<Case> cases = {
      {"add", [](Tape&, std::span<const Var> p) { return weighted(add(p[0], p[1]), 1); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"sub", [](Tape&, std::span<const Var> p) { return weighted(sub(p[0], p[1]), 2); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"mul", [](Tape&, std::span<const Var> p) { return weighted(mul(p[0], p[1]), 3); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"scale", [](Tape&, std::span<const Var> p) { return weighted(add_scalar(scale(p[0], -2.5), 0.7), 4); },
       {random_tensor({6}, rng)}},
      {"add_row", [](Tape&, std::span<const Var> p) { return weighted(add_row(p[0], p[1]), 5); },
       {random_tensor({3, 4}, rng), random_tensor({4}, rng)}},
      {"matmul", [](Tape&, std::span<const Var> p) { return weighted(matmul(p[0], p[1]), 6); },
       {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}},
      {"exp", [](Tape&, std::span<const Var> p) { return weighted(exp(p[0]), 7); }, {random_tensor({5}, rng)}},
      {"log", [](Tape&, std::span<const Var> p) { return weighted(log(p[0]), 8); },
       {random_tensor({5}, rng, 0.3, 2.0)}},
      {"abs", [](Tape&, std::span<const Var> p) { return weighted(abs(p[0]), 9); }, {away_from_zero({5})}},
      {"max", [](Tape&, std::span<const Var> p) { return weighted(max_with_scalar(p[0], 0.0), 10); },
       {away_from_zero({5})}},
      {"relu", [](Tape&, std::span<const Var> p) { return weighted(relu(p[0]), 11); }, {away_from_zero({5})}},
      {"sigmoid", [](Tape&, std::span<const Var> p) { return weighted(sigmoid(p[0]), 12); },
       {random_tensor({2, 3}, rng, -3, 3)}},
      {"softmax", [](Tape&, std::span<const Var> p) { return weighted(softmax(p[0]), 13); },
       {random_tensor({3, 5}, rng, -3, 3)}},
      {"mean", [](Tape&, std::span<const Var> p) { return mean(mul(p[0], p[0])); }, {random_tensor({4, 2}, rng)}},
      {"mean_rows", [](Tape&, std::span<const Var> p) { return weighted(mean_rows(p[0]), 14); },
       {random_tensor({4, 3}, rng)}},
      {"concat_cols", [](Tape&, std::span<const Var> p) { return weighted(concat_cols(p[0], p[1]), 15); },
       {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)}},
      {"slice_cols", [](Tape&, std::span<const Var> p) { return weighted(slice_cols(p[0], 1, 4), 16); },
       {random_tensor({3, 5}, rng)}},
      {"gather", [](Tape&, std::span<const Var> p) { return weighted(gather(p[0], {0, 3, 3, 5}), 17); },
       {random_tensor({2, 3}, rng)}},
  };
  for (const Case& c : cases) EXPECT_LT(gradcheck(c.f, c.point).max_rel_error, 1e-8) << c.name;
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<Tensor> p = {Tensor::vector({1.0, -2.0})};
  AdamState adam({0.1}, p);
  const std::vector<Tensor> g = {Tensor::vector({0.0, 0.0})};
  adam.step(p, g);
  EXPECT_EQ(p[0], Tensor::vector({1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> p = {Tensor::scalar(0.0)};
  AdamState adam({0.1}, p);
  adam.step(p, std::vector<Tensor>{Tensor::scalar(1.0)});
  EXPECT_NEAR(p[0].item(), -0.1, 1e-8);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<Tensor> p = {Tensor::scalar(1.0)};
  AdamState adam({0.05}, p);
  for (int i = 0; i < 100; ++i) adam.step(p, std::vector<Tensor>{Tensor::scalar(2.0 * p[0].item())});
  EXPECT_LT(std::abs(p[0].item()), 0.2);
}

TEST(Adam, ShapeMismatch) {
  std::vector<Tensor> p = {Tensor::vector({1.0, 2.0})};
  AdamState adam({}, p);
  EXPECT_THROW(adam.step(p, std::vector<Tensor>{Tensor::scalar(1.0)}), ShapeError);
}
