#include "eif/autodiff.hpp"
#include "eif/gradcheck.hpp"

#include "fd_cases.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace eif;
using namespace eif::fd;

TEST(Tensor, ShapeAndItem) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_str(t.shape()), "[2, 3]");
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(t.item(), std::exception);
  EXPECT_THROW(t.reshaped({4}), std::exception);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1, 2, 3}), std::exception);
}

TEST(Autodiff, ReluForward) {
  Tape t;
  auto y = ad::relu(t.constant(Tensor::vector({-1, 0, 2})));
  EXPECT_EQ(y.value(), Tensor::vector({0, 0, 2}));
}

TEST(Autodiff, ConvOfOnesIsNine) {
  Tape t;
  auto x = t.constant(Tensor({1, 1, 3, 3}, 1.0));
  auto w = t.constant(Tensor({1, 1, 3, 3}, 1.0));
  auto y = ad::conv2d(x, w);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 9.0);
}

TEST(Autodiff, SoftmaxOfZeros) {
  Tape t;
  auto y = ad::softmax(t.constant(Tensor::vector({0, 0})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(Autodiff, SumGradIsOnes) {
  Tape t;
  auto x = t.leaf(Tensor::vector({3, -2, 7}), true);
  backward(t, ad::sum(x));
  EXPECT_EQ(t.grad(x), Tensor::vector({1, 1, 1}));
}

TEST(Autodiff, MeanReluGrad) {
  Tape t;
  auto x = t.leaf(Tensor::vector({-1, 2}), true);
  backward(t, ad::mean(ad::relu(x)));
  EXPECT_EQ(t.grad(x), Tensor::vector({0, 0.5}));
}

TEST(Autodiff, ReluSubgradientAtZeroIsZero) {
  Tape t;
  auto x = t.leaf(Tensor::vector({0.0}), true);
  backward(t, ad::sum(ad::relu(x)));
  EXPECT_EQ(t.grad(x)[0], 0.0);
}

TEST(Autodiff, UnusedLeafGetsZeroGrad) {
  Tape t;
  auto x = t.leaf(Tensor::vector({1, 2}), true);
  auto z = t.leaf(Tensor::vector({5}), true);
  backward(t, ad::sum(x));
  EXPECT_EQ(t.grad(z), Tensor::vector({0}));
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  Tape t;
  auto x = t.leaf(Tensor::vector({3}), true);
  backward(t, ad::sum(ad::mul(x, x)));
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 6.0);
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape t;
  auto a = t.constant(Tensor({2, 3}));
  auto b = t.constant(Tensor({4, 2}));
  EXPECT_THROW(ad::matmul(a, b), std::invalid_argument);
  EXPECT_THROW(ad::add(a, t.constant(Tensor({2}))), std::invalid_argument);
}

TEST(Autodiff, CrossEntropyOfUniformLogits) {
  Tape t;
  auto logits = t.constant(Tensor({1, 10}, 0.0));
  std::vector<int> tgt{3};
  EXPECT_NEAR(ad::cross_entropy(logits, tgt).value().item(), std::log(10.0), 1e-12);
}

TEST(GradCheck, SumOfSquares) {
  auto f = [](Tape& t, Var x) { return ad::sum(ad::mul(x, x)); };
  EXPECT_LT(finite_difference_check(f, Tensor::vector({1, 2}), 1e-5), 1e-6);
}

TEST(GradCheck, ConstantIsExactlyZero) {
  auto f = [](Tape& t, Var) { return t.constant(Tensor::scalar(3.0)); };
  EXPECT_EQ(finite_difference_check(f, Tensor::vector({1, 2, 3}), 1e-5), 0.0);
}

// Every primitive against the central-difference oracle on seeded inputs.
class PrimitiveFd : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveFd, AllPrimitives) {
  const std::uint64_t s = static_cast<std::uint64_t>(GetParam());
  for (const auto& c : primitive_fd_cases(s))
    EXPECT_LT(finite_difference_check(c.program, c.input, 1e-6), 1e-4) << c.name << " seed " << s;
}

INSTANTIATE_TEST_SUITE_P(Seeds, PrimitiveFd, ::testing::Range(0, 5));
