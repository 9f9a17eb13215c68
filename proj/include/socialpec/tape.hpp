#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "socialpec/param_store.hpp"
#include "socialpec/tensor.hpp"

namespace socialpec {

class Tape;

// Handle to a tape node. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  inline const Tensor& value() const;
  inline const Shape& shape() const;
  inline const Tensor& grad() const;
};

// Define-by-run reverse-mode gradient tape. A tape is built fresh for every
// forward pass and confined to one thread; backward() runs once.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> backward;  // empty for leaves
    Tensor* sink = nullptr;               // external gradient accumulator
  };

  Var leaf(Tensor value, Tensor* grad_sink = nullptr) {
    return make("leaf", std::move(value), nullptr, grad_sink);
  }

  // Leaf bound to a ParamStore entry; backward() accumulates into its grad.
  Var param(ParamStore& store, const std::string& name) {
    return make("param", store.value(name), nullptr, &store.grad(name));
  }

  Var constant(double v) { return leaf(Tensor::scalar(v)); }

  // Id the next node will get; lets backward closures capture their own id.
  int next_id() const { return static_cast<int>(nodes_.size()); }

  Var make(const char* op, Tensor value, std::function<void(Tape&)> backward,
           Tensor* sink = nullptr) {
    if (!value.all_finite())
      throw NumericError(std::string(op) + ": produced non-finite values");
    Node n;
    n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.sink = sink;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 and propagates in reverse creation order, which
  // is a topological order under define-by-run. Single-shot per tape.
  void backward(Var out) {
    if (out.tape != this) throw ShapeError("backward: var belongs to another tape");
    if (ran_backward_) throw ShapeError("backward: tape already differentiated");
    ran_backward_ = true;
    Tensor& seed = grad(out.id);
    if (seed.numel() != 1)
      throw ShapeError("backward: output must be scalar, got " +
                       shape_str(seed.shape()));
    seed.fill(1.0);
    for (int i = out.id; i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      if (node.backward) node.backward(*this);
    }
    for (auto& node : nodes_) {
      if (node.sink) *node.sink += node.grad;
    }
  }

 private:
  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline const Shape& Var::shape() const { return value().shape(); }
inline const Tensor& Var::grad() const { return tape->grad(id); }

namespace detail {

inline Tape* same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ShapeError(std::string(op) + ": operands from different tapes");
  return a.tape;
}

// outer/len/inner decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for " + shape_str(s));
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  if (out.empty()) out.push_back(1);  // no rank-0 tensors
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives. Each returns the forward value and records an exact analytic
// backward rule. add/mul broadcast by NumPy rules; gradients of broadcast
// operands are reduced over the broadcast axes.

inline Var add(Var a, Var b) {
  Tape* t = detail::same_tape(a, b, "add");
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), "add");
  const Shape sa = a.shape(), sb = b.shape();
  Tensor out(out_shape);
  {
    const Tensor &av = a.value(), &bv = b.value();
    for_each_broadcast(out_shape, sa, sb,
                       [&](std::size_t i, std::size_t oa, std::size_t ob) {
                         out[i] = av[oa] + bv[ob];
                       });
  }
  const int ia = a.id, ib = b.id, self = t->next_id();
  return t->make("add", std::move(out),
                 [ia, ib, self, out_shape, sa, sb](Tape& tp) {
                   const Tensor& g = tp.grad(self);
                   Tensor &ga = tp.grad(ia), &gb = tp.grad(ib);
                   for_each_broadcast(out_shape, sa, sb,
                                      [&](std::size_t i, std::size_t oa, std::size_t ob) {
                                        ga[oa] += g[i];
                                        gb[ob] += g[i];
                                      });
                 });
}

inline Var mul(Var a, Var b) {
  Tape* t = detail::same_tape(a, b, "mul");
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), "mul");
  const Shape sa = a.shape(), sb = b.shape();
  Tensor out(out_shape);
  {
    const Tensor &av = a.value(), &bv = b.value();
    for_each_broadcast(out_shape, sa, sb,
                       [&](std::size_t i, std::size_t oa, std::size_t ob) {
                         out[i] = av[oa] * bv[ob];
                       });
  }
  const int ia = a.id, ib = b.id, self = t->next_id();
  return t->make("mul", std::move(out),
                 [ia, ib, self, out_shape, sa, sb](Tape& tp) {
                   const Tensor& g = tp.grad(self);
                   const Tensor &av = tp.value(ia), &bv = tp.value(ib);
                   Tensor &ga = tp.grad(ia), &gb = tp.grad(ib);
                   for_each_broadcast(out_shape, sa, sb,
                                      [&](std::size_t i, std::size_t oa, std::size_t ob) {
                                        ga[oa] += g[i] * bv[ob];
                                        gb[ob] += g[i] * av[oa];
                                      });
                 });
}

inline Var scale(Var a, double alpha) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) v *= alpha;
  const int ia = a.id, self = t->next_id();
  return t->make("scale", std::move(out), [ia, self, alpha](Tape& tp) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += alpha * g[i];
  });
}

inline Var add_scalar(Var a, double c) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) v += c;
  const int ia = a.id, self = t->next_id();
  return t->make("add_scalar", std::move(out), [ia, self](Tape& tp) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

inline Var matmul(Var a, Var b) {
  Tape* t = detail::same_tape(a, b, "matmul");
  const Shape &sa = a.shape(), &sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " +
                     shape_str(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  {
    const double *av = a.value().data(), *bv = b.value().data();
    double* ov = out.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double x = av[i * k + p];
        if (x == 0.0) continue;
        const double* brow = bv + p * n;
        double* orow = ov + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
      }
  }
  const int ia = a.id, ib = b.id, self = t->next_id();
  return t->make("matmul", std::move(out), [ia, ib, self, m, k, n](Tape& tp) {
    const double* g = tp.grad(self).data();
    const double *av = tp.value(ia).data(), *bv = tp.value(ib).data();
    double *ga = tp.grad(ia).data(), *gb = tp.grad(ib).data();
    // dA = dC * B^T
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double s = 0.0;
        const double *grow = g + i * n, *brow = bv + p * n;
        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
        ga[i * k + p] += s;
      }
    // dB = A^T * dC
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double x = av[i * k + p];
        if (x == 0.0) continue;
        const double* grow = g + i * n;
        double* gbrow = gb + p * n;
        for (std::size_t j = 0; j < n; ++j) gbrow[j] += x * grow[j];
      }
  });
}

inline Var tanh(Var a) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) v = std::tanh(v);
  const int ia = a.id, self = t->next_id();
  return t->make("tanh", std::move(out), [ia, self](Tape& tp) {
    const Tensor &g = tp.grad(self), &y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var leaky_relu(Var a, double slope = 0.01) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) v = v >= 0.0 ? v : slope * v;
  const int ia = a.id, self = t->next_id();
  return t->make("leaky_relu", std::move(out), [ia, self, slope](Tape& tp) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.value(ia);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
  });
}

inline Var log(Var a) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) {
    if (v <= 0.0) throw NumericError("log: non-positive input");
    v = std::log(v);
  }
  const int ia = a.id, self = t->next_id();
  return t->make("log", std::move(out), [ia, self](Tape& tp) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.value(ia);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / x[i];
  });
}

inline Var exp(Var a) {
  Tape* t = a.tape;
  Tensor out = a.value();
  for (double& v : out.vec()) v = std::exp(v);
  const int ia = a.id, self = t->next_id();
  return t->make("exp", std::move(out), [ia, self](Tape& tp) {
    const Tensor &g = tp.grad(self), &y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i];
  });
}

// L2 norm reducing one axis. Subgradient at a zero vector is defined as 0.
inline Var l2norm(Var a, std::size_t axis) {
  Tape* t = a.tape;
  const Shape sa = a.shape();
  const auto sp = detail::split_axis(sa, axis, "l2norm");
  Tensor out(detail::drop_axis(sa, axis));
  {
    const Tensor& av = a.value();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sp.len; ++j) {
          const double v = av[(o * sp.len + j) * sp.inner + i];
          s += v * v;
        }
        out[o * sp.inner + i] = std::sqrt(s);
      }
  }
  const int ia = a.id, self = t->next_id();
  return t->make("l2norm", std::move(out), [ia, self, sp](Tape& tp) {
    const Tensor &g = tp.grad(self), &y = tp.value(self), &x = tp.value(ia);
    Tensor& ga = tp.grad(ia);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t oi = o * sp.inner + i;
        if (y[oi] == 0.0) continue;
        const double gy = g[oi] / y[oi];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t xi = (o * sp.len + j) * sp.inner + i;
          ga[xi] += gy * x[xi];
        }
      }
  });
}

// Max pooling over the last axis with window == stride and ceiling semantics:
// a trailing partial window pools the remaining elements. Gradient flows to
// the (first) winner of each window only.
inline Var maxpool1d(Var a, std::size_t stride) {
  Tape* t = a.tape;
  if (stride == 0) throw ShapeError("maxpool1d: stride must be positive");
  const Shape sa = a.shape();
  if (sa.empty()) throw ShapeError("maxpool1d: scalar input");
  const std::size_t len = sa.back();
  const std::size_t rows = shape_numel(sa) / len;
  const std::size_t out_len = (len + stride - 1) / stride;
  Shape so = sa;
  so.back() = out_len;
  Tensor out(so);
  std::vector<std::size_t> winners(rows * out_len);
  {
    const Tensor& av = a.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t p = 0; p < out_len; ++p) {
        const std::size_t begin = p * stride;
        const std::size_t end = std::min(begin + stride, len);
        std::size_t best = r * len + begin;
        double best_v = av[best];
        for (std::size_t j = begin + 1; j < end; ++j) {
          const double v = av[r * len + j];
          if (v > best_v) {
            best_v = v;
            best = r * len + j;
          }
        }
        out[r * out_len + p] = best_v;
        winners[r * out_len + p] = best;
      }
  }
  const int ia = a.id, self = t->next_id();
  return t->make("maxpool1d", std::move(out),
                 [ia, self, winners = std::move(winners)](Tape& tp) {
                   const Tensor& g = tp.grad(self);
                   Tensor& ga = tp.grad(ia);
                   for (std::size_t i = 0; i < winners.size(); ++i)
                     ga[winners[i]] += g[i];
                 });
}

// Max over one axis; the axis is removed (result keeps rank >= 1).
inline Var max_axis(Var a, std::size_t axis) {
  Tape* t = a.tape;
  const Shape sa = a.shape();
  const auto sp = detail::split_axis(sa, axis, "max_axis");
  if (sp.len == 0) throw ShapeError("max_axis: empty axis");
  Tensor out(detail::drop_axis(sa, axis));
  std::vector<std::size_t> winners(sp.outer * sp.inner);
  {
    const Tensor& av = a.value();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        std::size_t best = (o * sp.len) * sp.inner + i;
        double best_v = av[best];
        for (std::size_t j = 1; j < sp.len; ++j) {
          const std::size_t xi = (o * sp.len + j) * sp.inner + i;
          if (av[xi] > best_v) {
            best_v = av[xi];
            best = xi;
          }
        }
        out[o * sp.inner + i] = best_v;
        winners[o * sp.inner + i] = best;
      }
  }
  const int ia = a.id, self = t->next_id();
  return t->make("max_axis", std::move(out),
                 [ia, self, winners = std::move(winners)](Tape& tp) {
                   const Tensor& g = tp.grad(self);
                   Tensor& ga = tp.grad(ia);
                   for (std::size_t i = 0; i < winners.size(); ++i)
                     ga[winners[i]] += g[i];
                 });
}

inline Var slice(Var a, std::size_t axis, std::size_t start, std::size_t stop) {
  Tape* t = a.tape;
  const Shape sa = a.shape();
  const auto sp = detail::split_axis(sa, axis, "slice");
  if (start >= stop || stop > sp.len)
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(stop) + ") invalid for axis of length " +
                     std::to_string(sp.len) + " in " + shape_str(sa));
  const std::size_t out_len = stop - start;
  Shape so = sa;
  so[axis] = out_len;
  Tensor out(so);
  {
    const Tensor& av = a.value();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < out_len; ++j)
        for (std::size_t i = 0; i < sp.inner; ++i)
          out[(o * out_len + j) * sp.inner + i] =
              av[(o * sp.len + (start + j)) * sp.inner + i];
  }
  const int ia = a.id, self = t->next_id();
  return t->make("slice", std::move(out), [ia, self, sp, start, out_len](Tape& tp) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < out_len; ++j)
        for (std::size_t i = 0; i < sp.inner; ++i)
          ga[(o * sp.len + (start + j)) * sp.inner + i] +=
              g[(o * out_len + j) * sp.inner + i];
  });
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape* t = parts[0].tape;
  const Shape s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const Var& p : parts) {
    detail::same_tape(parts[0], p, "concat");
    const Shape sp = p.shape();
    if (sp.size() != s0.size())
      throw ShapeError("concat: rank mismatch " + shape_str(s0) + " vs " +
                       shape_str(sp));
    for (std::size_t d = 0; d < s0.size(); ++d)
      if (d != axis && sp[d] != s0[d])
        throw ShapeError("concat: shape mismatch " + shape_str(s0) + " vs " +
                         shape_str(sp));
    lens.push_back(sp[axis]);
    total += sp[axis];
  }
  Shape so = s0;
  so[axis] = total;
  const auto spo = detail::split_axis(so, axis, "concat");
  Tensor out(so);
  std::vector<int> ids;
  {
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Tensor& av = parts[k].value();
      for (std::size_t o = 0; o < spo.outer; ++o)
        for (std::size_t j = 0; j < lens[k]; ++j)
          for (std::size_t i = 0; i < spo.inner; ++i)
            out[(o * total + off + j) * spo.inner + i] =
                av[(o * lens[k] + j) * spo.inner + i];
      off += lens[k];
      ids.push_back(parts[k].id);
    }
  }
  const int self = t->next_id();
  return t->make("concat", std::move(out),
                 [self, ids = std::move(ids), lens = std::move(lens), spo,
                  total](Tape& tp) {
                   const Tensor& g = tp.grad(self);
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < ids.size(); ++k) {
                     Tensor& ga = tp.grad(ids[k]);
                     for (std::size_t o = 0; o < spo.outer; ++o)
                       for (std::size_t j = 0; j < lens[k]; ++j)
                         for (std::size_t i = 0; i < spo.inner; ++i)
                           ga[(o * lens[k] + j) * spo.inner + i] +=
                               g[(o * total + off + j) * spo.inner + i];
                     off += lens[k];
                   }
                 });
}

inline Var reduce_sum(Var a) {
  Tape* t = a.tape;
  double s = 0.0;
  for (double v : a.value().vec()) s += v;
  const int ia = a.id, self = t->next_id();
  return t->make("reduce_sum", Tensor::scalar(s), [ia, self](Tape& tp) {
    const double g = tp.grad(self)[0];
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

inline Var reshape(Var a, Shape shape) {
  Tape* t = a.tape;
  Tensor out = a.value().reshaped(std::move(shape));
  const int ia = a.id, self = t->next_id();
  return t->make("reshape", std::move(out), [ia, self](Tape& tp) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

inline Var transpose(Var a) {
  Tape* t = a.tape;
  const Shape sa = a.shape();
  if (sa.size() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(sa));
  const std::size_t m = sa[0], n = sa[1];
  Tensor out(Shape{n, m});
  {
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  const int ia = a.id, self = t->next_id();
  return t->make("transpose", std::move(out), [ia, self, m, n](Tape& tp) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

// log(sum(exp(x))) over a rank-1 tensor, stabilized by max subtraction.
inline Var logsumexp(Var x) {
  Var m = max_axis(x, 0);
  Var shifted = sub(x, m);
  return add(m, log(reduce_sum(exp(shifted))));
}

}  // namespace socialpec
