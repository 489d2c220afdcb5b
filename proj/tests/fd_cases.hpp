#pragma once

// Seeded finite-difference cases covering every autodiff primitive.

#include "eif/autodiff.hpp"
#include "eif/gradcheck.hpp"

#include <random>
#include <string>
#include <vector>

namespace eif::fd {

inline Tensor random_tensor(Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(s));
  for (auto& v : t.data())
    v = n(rng);
  return t;
}

// Weighted sum so that every output coordinate gets a distinct upstream grad.
inline Var weighted(Tape& t, Var y, std::uint64_t seed) {
  return ad::sum(ad::mul(y, t.constant(random_tensor(y.shape(), seed + 1000))));
}

struct FdCase {
  std::string name;
  TensorProgram program;
  Tensor input;
};

inline std::vector<FdCase> primitive_fd_cases(std::uint64_t s) {
  std::vector<FdCase> cases;
  auto add = [&](const char* name, TensorProgram f, Tensor x) {
    cases.push_back({name, std::move(f), std::move(x)});
  };
  const Tensor other = random_tensor({3, 4}, s + 7);
  add("add", [=](Tape& t, Var x) { return weighted(t, ad::add(x, t.constant(other)), s); },
      random_tensor({3, 4}, s));
  add("add_bias", [=](Tape& t, Var x) {
    return weighted(t, ad::add(t.constant(other), x), s);
  }, random_tensor({4}, s));
  add("sub", [=](Tape& t, Var x) { return weighted(t, ad::sub(t.constant(other), x), s); },
      random_tensor({3, 4}, s));
  add("mul", [=](Tape& t, Var x) { return weighted(t, ad::mul(x, t.constant(other)), s); },
      random_tensor({3, 4}, s));
  add("scale", [=](Tape& t, Var x) { return weighted(t, ad::scale(x, -2.5), s); },
      random_tensor({5}, s));
  add("matmul_lhs", [=](Tape& t, Var x) {
    return weighted(t, ad::matmul(x, t.constant(random_tensor({4, 2}, s + 3))), s);
  }, random_tensor({3, 4}, s));
  add("matmul_rhs", [=](Tape& t, Var x) {
    return weighted(t, ad::matmul(t.constant(other), x), s);
  }, random_tensor({4, 2}, s));
  add("conv2d_x", [=](Tape& t, Var x) {
    auto w = t.constant(random_tensor({2, 2, 3, 3}, s + 4));
    auto b = t.constant(random_tensor({2}, s + 5));
    return weighted(t, ad::conv2d(x, w, &b, 1), s);
  }, random_tensor({2, 2, 5, 5}, s));
  add("conv2d_w", [=](Tape& t, Var w) {
    return weighted(t, ad::conv2d(t.constant(random_tensor({1, 2, 5, 4}, s + 4)), w), s);
  }, random_tensor({3, 2, 3, 3}, s));
  add("conv2d_b", [=](Tape& t, Var b) {
    auto x = t.constant(random_tensor({1, 1, 4, 4}, s + 4));
    auto w = t.constant(random_tensor({2, 1, 3, 3}, s + 5));
    return weighted(t, ad::conv2d(x, w, &b), s);
  }, random_tensor({2}, s));
  add("maxpool2d", [=](Tape& t, Var x) { return weighted(t, ad::maxpool2d(x), s); },
      random_tensor({1, 2, 5, 4}, s));
  add("relu", [=](Tape& t, Var x) { return weighted(t, ad::relu(x), s); },
      random_tensor({7}, s));
  add("tanh", [=](Tape& t, Var x) { return weighted(t, ad::tanh(x), s); },
      random_tensor({7}, s));
  add("reshape", [=](Tape& t, Var x) { return weighted(t, ad::reshape(x, {6, 2}), s); },
      random_tensor({3, 4}, s));
  add("mean", [=](Tape& t, Var x) { return ad::mean(ad::mul(x, x)); }, random_tensor({6}, s));
  add("select", [=](Tape& t, Var x) { return ad::select(ad::tanh(x), 2); },
      random_tensor({5}, s));
  add("embedding", [=](Tape& t, Var x) {
    std::vector<int> ids{1, 3, 1, 0};
    return weighted(t, ad::embedding(x, ids), s);
  }, random_tensor({4, 3}, s));
  add("layer_norm_x", [=](Tape& t, Var x) {
    auto g = t.constant(random_tensor({5}, s + 2));
    auto b = t.constant(random_tensor({5}, s + 3));
    return weighted(t, ad::layer_norm(x, g, b), s);
  }, random_tensor({3, 5}, s));
  add("layer_norm_gamma", [=](Tape& t, Var g) {
    auto x = t.constant(random_tensor({3, 5}, s + 2));
    auto b = t.constant(random_tensor({5}, s + 3));
    return weighted(t, ad::layer_norm(x, g, b), s);
  }, random_tensor({5}, s));
  add("softmax", [=](Tape& t, Var x) { return weighted(t, ad::softmax(x), s); },
      random_tensor({2, 6}, s));
  add("log_softmax", [=](Tape& t, Var x) { return weighted(t, ad::log_softmax(x), s); },
      random_tensor({2, 6}, s));
  for (bool causal : {false, true}) {
    auto att = [=](int which) {
      return [=](Tape& t, Var x) {
        Var in[3] = {t.constant(random_tensor({4, 8}, s + 11)), t.constant(random_tensor({4, 8}, s + 12)),
                     t.constant(random_tensor({4, 8}, s + 13))};
        in[which] = x;
        return weighted(t, ad::attention(in[0], in[1], in[2], 2, causal), s);
      };
    };
    add("attention_q", att(0), random_tensor({4, 8}, s));
    add("attention_k", att(1), random_tensor({4, 8}, s));
    add("attention_v", att(2), random_tensor({4, 8}, s));
  }
  add("cross_entropy", [=](Tape& t, Var x) {
    std::vector<int> tgt{2, 0, 4};
    return ad::cross_entropy(x, tgt);
  }, random_tensor({3, 5}, s));
  add("cross_entropy_rows", [=](Tape& t, Var x) {
    std::vector<int> tgt{1, 3};
    std::vector<std::size_t> rows{2, 0};
    return ad::cross_entropy(x, tgt, rows);
  }, random_tensor({3, 5}, s));
  return cases;
}

} // namespace eif::fd
