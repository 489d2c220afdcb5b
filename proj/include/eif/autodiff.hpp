#pragma once

// Reverse-mode automatic differentiation over a Wengert tape.
//
// Every op appends a node to the tape that owns its inputs. Node ids are
// assigned in creation order, so the tape is always topologically sorted and
// backward() is a single reverse sweep. A node only carries a backward closure
// when at least one of its inputs requires a gradient.

#include "eif/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace eif {

class Tape;

//! Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

class Tape {
public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  //! Appends an op output; `fn` is dropped when no input requires grad.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  //! Gradient of the last backward() target with respect to `v`.
  const Tensor& grad(Var v) const;

  //! Upstream gradient of node `id` during the backward sweep.
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }
  //! Gradient accumulator of `id` (allocated on first use); only call for
  //! nodes that require grad.
  Tensor& accum(std::size_t id);

  void backward(Var loss);

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool has_run_backward_ = false;
};

//! Runs the reverse sweep from a scalar loss. Every requires_grad leaf ends up
//! with a gradient (zeros when it does not influence `loss`).
void backward(Tape& tape, Var loss);

namespace ad {

// Elementwise; `b` may also match a trailing suffix of `a`'s shape (bias-style
// broadcast over the leading dims).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);

Var matmul(Var a, Var b); // [M,K] x [K,N]

//! NCHW input, OIHW kernel, optional bias [O], zero padding, stride 1.
Var conv2d(Var x, Var w, const Var* bias = nullptr, std::size_t padding = 0);
//! Non-overlapping window max pooling over H and W (floor on odd extents).
Var maxpool2d(Var x, std::size_t window = 2);

Var relu(Var x); // subgradient at 0 is 0
Var tanh(Var x);

Var reshape(Var x, Shape shape);
Var sum(Var x);
Var mean(Var x);
Var select(Var x, std::size_t flat_index);

Var embedding(Var table, std::span<const int> ids); // [V,D] -> [T,D]
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax(Var x);     // over the last dim
Var log_softmax(Var x); // over the last dim

//! Multi-head scaled dot-product attention on [T, D] projections; D is split
//! into `heads` contiguous slices. `causal` masks keys after each query.
Var attention(Var q, Var k, Var v, std::size_t heads, bool causal);

//! Mean over `rows` of -log softmax(logits[row])[target]. `targets[i]` is the
//! class of `rows[i]`; empty `rows` means every row in order.
Var cross_entropy(Var logits, std::span<const int> targets,
                  std::span<const std::size_t> rows = {});

} // namespace ad
} // namespace eif
