#include "eif/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace eif {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.is_leaf = false;
  for (auto id : inputs)
    n.requires_grad = n.requires_grad || nodes_.at(id).requires_grad;
  if (n.requires_grad)
    n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::grad(Var v) const {
  if (!has_run_backward_)
    throw std::logic_error("Tape::grad: backward() has not been run");
  const auto& n = nodes_.at(v.id);
  if (!n.requires_grad)
    throw std::logic_error("Tape::grad: node does not require grad");
  return n.grad;
}

Tensor& Tape::accum(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.numel() == 0)
    n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this)
    throw std::invalid_argument("backward: loss belongs to a different tape");
  const auto& lv = nodes_.at(loss.id).value;
  if (lv.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(lv.shape()));
  for (auto& n : nodes_)
    n.grad = Tensor();
  has_run_backward_ = true;
  if (nodes_[loss.id].requires_grad) {
    nodes_[loss.id].grad = Tensor(lv.shape(), 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.numel() == 0)
        continue;
      n.backward(*this, i);
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].requires_grad && nodes_[i].is_leaf)
      accum(i);
}

void backward(Tape& tape, Var loss) { tape.backward(loss); }

namespace ad {
namespace {

void check_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr)
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b,
                              const std::string& why = "") {
  std::string msg = std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                    shape_str(b);
  if (!why.empty())
    msg += " (" + why + ")";
  throw std::invalid_argument(msg);
}

// Inner extent of `b` when it equals `a` or is a trailing suffix of it.
std::size_t broadcast_inner(const char* op, const Shape& a, const Shape& b) {
  if (b.size() > a.size() || !std::equal(b.rbegin(), b.rend(), a.rbegin()))
    shape_error(op, a, b, "second operand must match or be a trailing suffix");
  return shape_numel(b);
}

std::size_t last_dim(const char* op, const Shape& s) {
  if (s.empty())
    throw std::invalid_argument(std::string(op) + ": needs rank >= 1, got scalar");
  return s.back();
}

} // namespace

Var add(Var a, Var b) {
  check_same_tape("add", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t inner = broadcast_inner("add", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] += bv[i % inner];
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b, inner](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(a.id)) {
      auto& ga = t.accum(a.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.accum(b.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gb[i % inner] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  check_same_tape("sub", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t inner = broadcast_inner("sub", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] -= bv[i % inner];
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b, inner](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(a.id)) {
      auto& ga = t.accum(a.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.accum(b.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gb[i % inner] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same_tape("mul", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t inner = broadcast_inner("mul", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] *= bv[i % inner];
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b, inner](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& av = t.value(a.id);
    const auto& bv = t.value(b.id);
    if (t.requires_grad(a.id)) {
      auto& ga = t.accum(a.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i] * bv[i % inner];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.accum(b.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gb[i % inner] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data())
    v *= c;
  return a.tape->record(std::move(out), {a.id}, [a, c](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto& ga = t.accum(a.id);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga[i] += c * g[i];
  });
}

Var matmul(Var a, Var b) {
  check_same_tape("matmul", a, b);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
    shape_error("matmul", as, bs, "expected [M,K] x [K,N]");
  const auto m = as[0], k = as[1], n = bs[1];
  Tensor out(Shape{m, n});
  MapMat(out.ptr(), m, n).noalias() =
      CMapMat(a.value().ptr(), m, k) * CMapMat(b.value().ptr(), k, n);
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b, m, k, n](Tape& t, std::size_t self) {
    CMapMat g(t.upstream(self).ptr(), m, n);
    if (t.requires_grad(a.id))
      MapMat(t.accum(a.id).ptr(), m, k).noalias() += g * CMapMat(t.value(b.id).ptr(), k, n).transpose();
    if (t.requires_grad(b.id))
      MapMat(t.accum(b.id).ptr(), k, n).noalias() += CMapMat(t.value(a.id).ptr(), m, k).transpose() * g;
  });
}

Var conv2d(Var x, Var w, const Var* bias, std::size_t padding) {
  check_same_tape("conv2d", x, w);
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4)
    shape_error("conv2d", xs, ws, "expected NCHW input and OIHW kernel");
  if (xs[1] != ws[1])
    shape_error("conv2d", xs, ws, "input channels differ");
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t O = ws[0], KH = ws[2], KW = ws[3];
  if (H + 2 * padding < KH || W + 2 * padding < KW)
    shape_error("conv2d", xs, ws, "kernel larger than padded input");
  if (bias) {
    check_same_tape("conv2d", x, *bias);
    if (bias->shape() != Shape{O})
      shape_error("conv2d", ws, bias->shape(), "bias must be [O]");
  }
  const std::size_t Ho = H + 2 * padding - KH + 1, Wo = W + 2 * padding - KW + 1;
  const std::size_t ckk = C * KH * KW, hw = Ho * Wo;
  const auto pad = static_cast<long>(padding);

  auto cols = std::make_shared<std::vector<double>>(N * ckk * hw, 0.0);
  const auto& xv = x.value();
  for (std::size_t n = 0; n < N; ++n) {
    double* col = cols->data() + n * ckk * hw;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t kh = 0; kh < KH; ++kh)
        for (std::size_t kw = 0; kw < KW; ++kw) {
          double* row = col + ((c * KH + kh) * KW + kw) * hw;
          for (std::size_t oh = 0; oh < Ho; ++oh) {
            const long ih = static_cast<long>(oh + kh) - pad;
            if (ih < 0 || ih >= static_cast<long>(H))
              continue;
            for (std::size_t ow = 0; ow < Wo; ++ow) {
              const long iw = static_cast<long>(ow + kw) - pad;
              if (iw < 0 || iw >= static_cast<long>(W))
                continue;
              row[oh * Wo + ow] = xv[((n * C + c) * H + ih) * W + iw];
            }
          }
        }
  }

  Tensor out(Shape{N, O, Ho, Wo});
  CMapMat wm(w.value().ptr(), O, ckk);
  for (std::size_t n = 0; n < N; ++n) {
    MapMat om(out.ptr() + n * O * hw, O, hw);
    om.noalias() = wm * CMapMat(cols->data() + n * ckk * hw, ckk, hw);
    if (bias)
      for (std::size_t o = 0; o < O; ++o)
        om.row(o).array() += bias->value()[o];
  }

  std::vector<std::size_t> inputs{x.id, w.id};
  if (bias)
    inputs.push_back(bias->id);
  const std::size_t bias_id = bias ? bias->id : 0;
  const bool has_bias = bias != nullptr;
  return x.tape->record(
      std::move(out), std::move(inputs),
      [=](Tape& t, std::size_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(w.id)) {
          MapMat gw(t.accum(w.id).ptr(), O, ckk);
          for (std::size_t n = 0; n < N; ++n)
            gw.noalias() += CMapMat(g.ptr() + n * O * hw, O, hw) *
                            CMapMat(cols->data() + n * ckk * hw, ckk, hw).transpose();
        }
        if (has_bias && t.requires_grad(bias_id)) {
          auto& gb = t.accum(bias_id);
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < O; ++o) {
              const double* gp = g.ptr() + (n * O + o) * hw;
              gb[o] += std::accumulate(gp, gp + hw, 0.0);
            }
        }
        if (t.requires_grad(x.id)) {
          auto& gx = t.accum(x.id);
          CMapMat wm(t.value(w.id).ptr(), O, ckk);
          RowMat gcol(ckk, hw);
          for (std::size_t n = 0; n < N; ++n) {
            gcol.noalias() = wm.transpose() * CMapMat(g.ptr() + n * O * hw, O, hw);
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t kh = 0; kh < KH; ++kh)
                for (std::size_t kw = 0; kw < KW; ++kw) {
                  const double* row = gcol.data() + ((c * KH + kh) * KW + kw) * hw;
                  for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const long ih = static_cast<long>(oh + kh) - pad;
                    if (ih < 0 || ih >= static_cast<long>(H))
                      continue;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                      const long iw = static_cast<long>(ow + kw) - pad;
                      if (iw < 0 || iw >= static_cast<long>(W))
                        continue;
                      gx[((n * C + c) * H + ih) * W + iw] += row[oh * Wo + ow];
                    }
                  }
                }
          }
        }
      });
}

Var maxpool2d(Var x, std::size_t window) {
  const auto& xs = x.shape();
  if (xs.size() != 4)
    throw std::invalid_argument("maxpool2d: expected NCHW input, got " + shape_str(xs));
  if (window == 0 || xs[2] < window || xs[3] < window)
    throw std::invalid_argument("maxpool2d: window " + std::to_string(window) +
                                " does not fit input " + shape_str(xs));
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t Ho = H / window, Wo = W / window;
  Tensor out(Shape{N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  const auto& xv = x.value();
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc)
    for (std::size_t oh = 0; oh < Ho; ++oh)
      for (std::size_t ow = 0; ow < Wo; ++ow, ++o) {
        std::size_t best = nc * H * W + oh * window * W + ow * window;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = nc * H * W + (oh * window + i) * W + ow * window + j;
            if (xv[idx] > xv[best])
              best = idx;
          }
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
  return x.tape->record(std::move(out), {x.id}, [x, argmax](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto& gx = t.accum(x.id);
    for (std::size_t i = 0; i < g.numel(); ++i)
      gx[(*argmax)[i]] += g[i];
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data())
    v = v > 0.0 ? v : 0.0;
  return x.tape->record(std::move(out), {x.id}, [x](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& xv = t.value(x.id);
    auto& gx = t.accum(x.id);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (xv[i] > 0.0)
        gx[i] += g[i];
  });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data())
    v = std::tanh(v);
  return x.tape->record(std::move(out), {x.id}, [x](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& y = t.value(self);
    auto& gx = t.accum(x.id);
    for (std::size_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x.id}, [x](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto& gx = t.accum(x.id);
    for (std::size_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i];
  });
}

Var sum(Var x) {
  const auto d = x.value().data();
  const double s = std::accumulate(d.begin(), d.end(), 0.0);
  return x.tape->record(Tensor::scalar(s), {x.id}, [x](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    for (auto& v : t.accum(x.id).data())
      v += g;
  });
}

Var mean(Var x) {
  const auto d = x.value().data();
  const double n = static_cast<double>(d.size());
  const double s = std::accumulate(d.begin(), d.end(), 0.0) / n;
  return x.tape->record(Tensor::scalar(s), {x.id}, [x, n](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0] / n;
    for (auto& v : t.accum(x.id).data())
      v += g;
  });
}

Var select(Var x, std::size_t flat_index) {
  if (flat_index >= x.value().numel())
    throw std::out_of_range("select: index " + std::to_string(flat_index) +
                            " out of range for shape " + shape_str(x.shape()));
  return x.tape->record(Tensor::scalar(x.value()[flat_index]), {x.id},
                        [x, flat_index](Tape& t, std::size_t self) {
                          t.accum(x.id)[flat_index] += t.upstream(self)[0];
                        });
}

Var embedding(Var table, std::span<const int> ids) {
  const auto& ts = table.shape();
  if (ts.size() != 2)
    throw std::invalid_argument("embedding: table must be [V,D], got " + shape_str(ts));
  if (ids.empty())
    throw std::invalid_argument("embedding: empty id list");
  const std::size_t V = ts[0], D = ts[1], T = ids.size();
  Tensor out(Shape{T, D});
  const auto& tv = table.value();
  for (std::size_t r = 0; r < T; ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= V)
      throw std::out_of_range("embedding: id " + std::to_string(ids[r]) +
                              " outside vocabulary of " + std::to_string(V));
    std::copy_n(tv.ptr() + ids[r] * D, D, out.ptr() + r * D);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return table.tape->record(std::move(out), {table.id},
                            [table, idv = std::move(idv), D](Tape& t, std::size_t self) {
                              const auto& g = t.upstream(self);
                              auto& gt = t.accum(table.id);
                              for (std::size_t r = 0; r < idv.size(); ++r)
                                for (std::size_t d = 0; d < D; ++d)
                                  gt[idv[r] * D + d] += g[r * D + d];
                            });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  check_same_tape("layer_norm", x, gamma);
  check_same_tape("layer_norm", x, beta);
  const std::size_t D = last_dim("layer_norm", x.shape());
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D})
    shape_error("layer_norm", x.shape(), gamma.shape(), "gain/bias must be [D]");
  const auto& xv = x.value();
  const std::size_t R = xv.numel() / D;
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(xv.numel());
  auto rstd = std::make_shared<std::vector<double>>(R);
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = xv.ptr() + r * D;
    double mu = 0.0;
    for (std::size_t d = 0; d < D; ++d)
      mu += row[d];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d)
      var += (row[d] - mu) * (row[d] - mu);
    var /= static_cast<double>(D);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t d = 0; d < D; ++d) {
      const double h = (row[d] - mu) * rs;
      (*xhat)[r * D + d] = h;
      out[r * D + d] = h * gv[d] + bv[d];
    }
  }
  return x.tape->record(
      std::move(out), {x.id, gamma.id, beta.id},
      [x, gamma, beta, xhat, rstd, R, D](Tape& t, std::size_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(beta.id)) {
          auto& gb = t.accum(beta.id);
          for (std::size_t i = 0; i < g.numel(); ++i)
            gb[i % D] += g[i];
        }
        if (t.requires_grad(gamma.id)) {
          auto& gg = t.accum(gamma.id);
          for (std::size_t i = 0; i < g.numel(); ++i)
            gg[i % D] += g[i] * (*xhat)[i];
        }
        if (t.requires_grad(x.id)) {
          const auto& gv = t.value(gamma.id);
          auto& gx = t.accum(x.id);
          const double invD = 1.0 / static_cast<double>(D);
          for (std::size_t r = 0; r < R; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
              const double gh = g[r * D + d] * gv[d];
              m1 += gh;
              m2 += gh * (*xhat)[r * D + d];
            }
            m1 *= invD;
            m2 *= invD;
            for (std::size_t d = 0; d < D; ++d) {
              const double gh = g[r * D + d] * gv[d];
              gx[r * D + d] += (*rstd)[r] * (gh - m1 - (*xhat)[r * D + d] * m2);
            }
          }
        }
      });
}

namespace {

void softmax_rows(const double* in, double* out, std::size_t R, std::size_t D) {
  for (std::size_t r = 0; r < R; ++r) {
    const double* x = in + r * D;
    double* y = out + r * D;
    const double mx = *std::max_element(x, x + D);
    double s = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      y[d] = std::exp(x[d] - mx);
      s += y[d];
    }
    for (std::size_t d = 0; d < D; ++d)
      y[d] /= s;
  }
}

} // namespace

Var softmax(Var x) {
  const std::size_t D = last_dim("softmax", x.shape());
  const std::size_t R = x.value().numel() / D;
  Tensor out(x.shape());
  softmax_rows(x.value().ptr(), out.ptr(), R, D);
  return x.tape->record(std::move(out), {x.id}, [x, R, D](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& y = t.value(self);
    auto& gx = t.accum(x.id);
    for (std::size_t r = 0; r < R; ++r) {
      double dot = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        dot += g[r * D + d] * y[r * D + d];
      for (std::size_t d = 0; d < D; ++d)
        gx[r * D + d] += y[r * D + d] * (g[r * D + d] - dot);
    }
  });
}

Var log_softmax(Var x) {
  const std::size_t D = last_dim("log_softmax", x.shape());
  const auto& xv = x.value();
  const std::size_t R = xv.numel() / D;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = xv.ptr() + r * D;
    const double mx = *std::max_element(row, row + D);
    double s = 0.0;
    for (std::size_t d = 0; d < D; ++d)
      s += std::exp(row[d] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t d = 0; d < D; ++d)
      out[r * D + d] = row[d] - lse;
  }
  return x.tape->record(std::move(out), {x.id}, [x, R, D](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& y = t.value(self);
    auto& gx = t.accum(x.id);
    for (std::size_t r = 0; r < R; ++r) {
      double gs = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        gs += g[r * D + d];
      for (std::size_t d = 0; d < D; ++d)
        gx[r * D + d] += g[r * D + d] - std::exp(y[r * D + d]) * gs;
    }
  });
}

Var attention(Var q, Var k, Var v, std::size_t heads, bool causal) {
  check_same_tape("attention", q, k);
  check_same_tape("attention", q, v);
  const auto& qs = q.shape();
  if (qs.size() != 2 || k.shape() != qs || v.shape() != qs)
    shape_error("attention", qs, k.shape() != qs ? k.shape() : v.shape(),
                "query/key/value must share shape [T,D]");
  const std::size_t T = qs[0], D = qs[1];
  if (heads == 0 || D % heads != 0)
    throw std::invalid_argument("attention: model dim " + std::to_string(D) +
                                " not divisible into " + std::to_string(heads) + " heads");
  const std::size_t dh = D / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<RowMat>>(heads);
  Tensor out(Shape{T, D});
  CMapMat Q(q.value().ptr(), T, D), K(k.value().ptr(), T, D), Vm(v.value().ptr(), T, D);
  MapMat O(out.ptr(), T, D);
  for (std::size_t h = 0; h < heads; ++h) {
    RowMat S = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * sc;
    if (causal)
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = i + 1; j < T; ++j)
          S(i, j) = -std::numeric_limits<double>::infinity();
    RowMat P(T, T);
    softmax_rows(S.data(), P.data(), T, T);
    O.middleCols(h * dh, dh).noalias() = P * Vm.middleCols(h * dh, dh);
    (*probs)[h] = std::move(P);
  }

  return q.tape->record(
      std::move(out), {q.id, k.id, v.id},
      [q, k, v, probs, T, D, dh, heads, sc](Tape& t, std::size_t self) {
        CMapMat G(t.upstream(self).ptr(), T, D);
        CMapMat Q(t.value(q.id).ptr(), T, D), K(t.value(k.id).ptr(), T, D),
            Vm(t.value(v.id).ptr(), T, D);
        const bool gq = t.requires_grad(q.id), gk = t.requires_grad(k.id),
                   gv = t.requires_grad(v.id);
        for (std::size_t h = 0; h < heads; ++h) {
          const RowMat& P = (*probs)[h];
          auto Gh = G.middleCols(h * dh, dh);
          if (gv)
            MapMat(t.accum(v.id).ptr(), T, D).middleCols(h * dh, dh).noalias() +=
                P.transpose() * Gh;
          if (!gq && !gk)
            continue;
          RowMat dP = Gh * Vm.middleCols(h * dh, dh).transpose();
          RowMat dS(T, T);
          for (std::size_t i = 0; i < T; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < T; ++j)
              dot += dP(i, j) * P(i, j);
            for (std::size_t j = 0; j < T; ++j)
              dS(i, j) = P(i, j) * (dP(i, j) - dot) * sc;
          }
          if (gq)
            MapMat(t.accum(q.id).ptr(), T, D).middleCols(h * dh, dh).noalias() +=
                dS * K.middleCols(h * dh, dh);
          if (gk)
            MapMat(t.accum(k.id).ptr(), T, D).middleCols(h * dh, dh).noalias() +=
                dS.transpose() * Q.middleCols(h * dh, dh);
        }
      });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const std::size_t> rows) {
  const auto& ls = logits.shape();
  if (ls.size() != 2)
    throw std::invalid_argument("cross_entropy: logits must be [R,C], got " + shape_str(ls));
  const std::size_t R = ls[0], C = ls[1];
  std::vector<std::size_t> sel;
  if (rows.empty()) {
    sel.resize(R);
    std::iota(sel.begin(), sel.end(), std::size_t{0});
  } else {
    sel.assign(rows.begin(), rows.end());
  }
  if (targets.size() != sel.size())
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(sel.size()) + " rows");
  if (sel.empty())
    throw std::invalid_argument("cross_entropy: no rows selected");
  const auto& lv = logits.value();
  auto probs = std::make_shared<std::vector<double>>(sel.size() * C);
  double total = 0.0;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (sel[i] >= R)
      throw std::out_of_range("cross_entropy: row " + std::to_string(sel[i]) + " >= " +
                              std::to_string(R));
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= C)
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[i]) +
                              " outside " + std::to_string(C) + " classes");
    const double* row = lv.ptr() + sel[i] * C;
    double* p = probs->data() + i * C;
    softmax_rows(row, p, 1, C);
    const double mx = *std::max_element(row, row + C);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      s += std::exp(row[c] - mx);
    total += mx + std::log(s) - row[targets[i]];
  }
  const double n = static_cast<double>(sel.size());
  std::vector<int> tv(targets.begin(), targets.end());
  return logits.tape->record(
      Tensor::scalar(total / n), {logits.id},
      [logits, probs, sel = std::move(sel), tv = std::move(tv), C, n](Tape& t, std::size_t self) {
        const double g = t.upstream(self)[0] / n;
        auto& gl = t.accum(logits.id);
        for (std::size_t i = 0; i < sel.size(); ++i) {
          double* out = gl.ptr() + sel[i] * C;
          const double* p = probs->data() + i * C;
          for (std::size_t c = 0; c < C; ++c)
            out[c] += g * p[c];
          out[tv[i]] -= g;
        }
      });
}

} // namespace ad
} // namespace eif
