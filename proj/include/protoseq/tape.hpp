#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "protoseq/param.hpp"
#include "protoseq/rng.hpp"
#include "protoseq/tensor.hpp"

namespace protoseq {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t idx = 0;

  const Tensor& value() const;
  const Shape& shape() const;
  std::size_t numel() const { return value().numel(); }
  double scalar() const;
  bool requires_grad() const;
};

// Define-by-run gradient tape. Nodes are recorded in execution order, which
// is a topological order, so the backward sweep is a single reverse pass.
// A tape and its vars are confined to one thread.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor t) {
    check_finite(t, "constant");
    return push(std::move(t), false);
  }

  Var leaf(Parameter& p) { return push(p.value, grad_enabled_, &p); }

  Var push(Tensor value, bool requires_grad, Parameter* bound = nullptr) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  void set_backprop(std::size_t i, std::function<void(Tape&)> fn) { nodes_[i].backprop = std::move(fn); }

  const Tensor& value(std::size_t i) const { return nodes_[i].value; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }

  // Node-local gradient after backward(); empty if the node was not reached.
  const std::vector<double>& grad(Var v) const { return nodes_[v.idx].grad; }

  // Allocates on first touch during the backward sweep.
  std::vector<double>& grad_buf(std::size_t i) {
    Node& n = nodes_[i];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
  }

  // Reverse-mode sweep. Every Parameter reachable from `loss` receives
  // d loss / d param added into its grad buffer; repeated calls accumulate.
  void backward(Var loss) {
    if (loss.tape != this) throw std::logic_error("backward: loss from a different tape");
    if (!nodes_[loss.idx].value.is_scalar())
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(nodes_[loss.idx].value.shape));
    if (!grad_enabled_) throw std::logic_error("backward: tape recorded with gradients disabled");
    for (Node& n : nodes_) n.grad.clear();
    grad_buf(loss.idx)[0] = 1.0;
    for (std::size_t i = loss.idx + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.bound)
        n.bound->accumulate(n.grad);
      else if (n.backprop)
        n.backprop(*this);
    }
  }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Parameter* bound = nullptr;
    std::function<void(Tape&)> backprop;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

inline const Tensor& Var::value() const { return tape->value(idx); }
inline const Shape& Var::shape() const { return tape->value(idx).shape; }
inline bool Var::requires_grad() const { return tape->requires_grad(idx); }
inline double Var::scalar() const {
  const Tensor& t = value();
  if (!t.is_scalar()) throw std::logic_error("scalar() on non-scalar var");
  return t.data[0];
}

namespace detail {

inline Tape& op_tape(std::initializer_list<Var> vars) {
  Tape* t = vars.begin()->tape;
  for (const Var& v : vars)
    if (v.tape != t) throw std::logic_error("op: vars from different tapes");
  return *t;
}

inline bool op_requires(Tape& t, std::initializer_list<Var> vars) {
  if (!t.grad_enabled()) return false;
  for (const Var& v : vars)
    if (t.requires_grad(v.idx)) return true;
  return false;
}

}  // namespace detail

// ---- linear algebra ---------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Tape& t = detail::op_tape({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape) + " and " + shape_str(B.shape));
  const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
  Tensor Y = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double av = A.data[i * k + l];
      if (av == 0.0) continue;
      const double* brow = &B.data[l * n];
      double* yrow = &Y.data[i * n];
      for (std::size_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  check_finite(Y, "matmul");
  const bool req = detail::op_requires(t, {a, b});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, bi = b.idx, yi = y.idx;
    t.set_backprop(yi, [ai, bi, yi, m, k, n](Tape& tp) {
      const std::vector<double> go = tp.grad_buf(yi);
      const Tensor& A = tp.value(ai);
      const Tensor& B = tp.value(bi);
      if (tp.requires_grad(ai)) {
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = go[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) ga[i * k + l] += g * B.data[l * n + j];
          }
      }
      if (tp.requires_grad(bi)) {
        std::vector<double>& gb = tp.grad_buf(bi);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) {
            const double av = A.data[i * k + l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[l * n + j] += av * go[i * n + j];
          }
      }
    });
  }
  return y;
}

// x [d] times w [d×o] -> [o]
inline Var vecmat(Var x, Var w) {
  Tape& t = detail::op_tape({x, w});
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (X.shape.size() != 1 || W.shape.size() != 2 || X.shape[0] != W.shape[0])
    throw std::invalid_argument("vecmat: incompatible shapes " + shape_str(X.shape) + " and " + shape_str(W.shape));
  const std::size_t d = X.shape[0], o = W.shape[1];
  Tensor Y = Tensor::zeros({o});
  for (std::size_t i = 0; i < d; ++i) {
    const double xv = X.data[i];
    if (xv == 0.0) continue;
    const double* wrow = &W.data[i * o];
    for (std::size_t j = 0; j < o; ++j) Y.data[j] += xv * wrow[j];
  }
  check_finite(Y, "vecmat");
  const bool req = detail::op_requires(t, {x, w});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t xi = x.idx, wi = w.idx, yi = y.idx;
    t.set_backprop(yi, [xi, wi, yi, d, o](Tape& tp) {
      const std::vector<double> go = tp.grad_buf(yi);
      const Tensor& X = tp.value(xi);
      const Tensor& W = tp.value(wi);
      if (tp.requires_grad(xi)) {
        std::vector<double>& gx = tp.grad_buf(xi);
        for (std::size_t i = 0; i < d; ++i) {
          double acc = 0.0;
          const double* wrow = &W.data[i * o];
          for (std::size_t j = 0; j < o; ++j) acc += go[j] * wrow[j];
          gx[i] += acc;
        }
      }
      if (tp.requires_grad(wi)) {
        std::vector<double>& gw = tp.grad_buf(wi);
        for (std::size_t i = 0; i < d; ++i) {
          const double xv = X.data[i];
          if (xv == 0.0) continue;
          double* grow = &gw[i * o];
          for (std::size_t j = 0; j < o; ++j) grow[j] += xv * go[j];
        }
      }
    });
  }
  return y;
}

// ---- elementwise ------------------------------------------------------------

// add: same shape, or row-vector b [n] broadcast over a [m×n]
inline Var add(Var a, Var b) {
  Tape& t = detail::op_tape({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool rowcast = A.shape.size() == 2 && B.shape.size() == 1 && A.shape[1] == B.shape[0];
  if (!rowcast && A.shape != B.shape)
    throw std::invalid_argument("add: incompatible shapes " + shape_str(A.shape) + " and " + shape_str(B.shape));
  Tensor Y = A;
  if (rowcast) {
    const std::size_t m = A.shape[0], n = A.shape[1];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) Y.data[i * n + j] += B.data[j];
  } else {
    for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] += B.data[i];
  }
  check_finite(Y, "add");
  const bool req = detail::op_requires(t, {a, b});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, bi = b.idx, yi = y.idx;
    t.set_backprop(yi, [ai, bi, yi, rowcast](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      if (tp.requires_grad(ai)) {
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (tp.requires_grad(bi)) {
        std::vector<double>& gb = tp.grad_buf(bi);
        if (rowcast) {
          const std::size_t n = gb.size();
          for (std::size_t i = 0; i < go.size(); ++i) gb[i % n] += go[i];
        } else {
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
      }
    });
  }
  return y;
}

inline Var add_n(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty input");
  Tape& t = *xs[0].tape;
  Tensor Y = xs[0].value();
  bool req = t.grad_enabled() && t.requires_grad(xs[0].idx);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& X = xs[k].value();
    if (X.shape != Y.shape)
      throw std::invalid_argument("add_n: shape mismatch " + shape_str(Y.shape) + " vs " + shape_str(X.shape));
    for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] += X.data[i];
    req = req || (t.grad_enabled() && t.requires_grad(xs[k].idx));
  }
  check_finite(Y, "add_n");
  Var y = t.push(std::move(Y), req);
  if (req) {
    std::vector<std::size_t> srcs(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) srcs[k] = xs[k].idx;
    const std::size_t yi = y.idx;
    t.set_backprop(yi, [srcs, yi](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      for (std::size_t s : srcs) {
        if (!tp.requires_grad(s)) continue;
        std::vector<double>& g = tp.grad_buf(s);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
    });
  }
  return y;
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::op_tape({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape)
    throw std::invalid_argument("sub: incompatible shapes " + shape_str(A.shape) + " and " + shape_str(B.shape));
  Tensor Y = A;
  for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] -= B.data[i];
  check_finite(Y, "sub");
  const bool req = detail::op_requires(t, {a, b});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, bi = b.idx, yi = y.idx;
    t.set_backprop(yi, [ai, bi, yi](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      if (tp.requires_grad(ai)) {
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (tp.requires_grad(bi)) {
        std::vector<double>& gb = tp.grad_buf(bi);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return y;
}

// hadamard product, same shape
inline Var mul(Var a, Var b) {
  Tape& t = detail::op_tape({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape)
    throw std::invalid_argument("mul: incompatible shapes " + shape_str(A.shape) + " and " + shape_str(B.shape));
  Tensor Y = A;
  for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= B.data[i];
  check_finite(Y, "mul");
  const bool req = detail::op_requires(t, {a, b});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, bi = b.idx, yi = y.idx;
    t.set_backprop(yi, [ai, bi, yi](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      const Tensor& A = tp.value(ai);
      const Tensor& B = tp.value(bi);
      if (tp.requires_grad(ai)) {
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * B.data[i];
      }
      if (tp.requires_grad(bi)) {
        std::vector<double>& gb = tp.grad_buf(bi);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * A.data[i];
      }
    });
  }
  return y;
}

namespace detail {

// unary op with elementwise derivative computable from input and output
template <class Fwd, class Bwd>
Var unary_op(Var a, const char* name, Fwd&& f, Bwd&& dfdx /* (x, y) -> dy/dx */) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  Tensor Y = A;
  for (double& v : Y.data) v = f(v);
  check_finite(Y, name);
  const bool req = op_requires(t, {a});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    auto d = std::forward<Bwd>(dfdx);
    t.set_backprop(yi, [ai, yi, d](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      const Tensor& X = tp.value(ai);
      const Tensor& Y = tp.value(yi);
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * d(X.data[i], Y.data[i]);
    });
  }
  return y;
}

}  // namespace detail

// relu; subgradient at 0 is 0
inline Var relu(Var a) {
  return detail::unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh_op(Var a) {
  return detail::unary_op(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary_op(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var neg(Var a) {
  return detail::unary_op(
      a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

inline Var scale(Var a, double c) {
  return detail::unary_op(
      a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(Var a, double c) {
  return detail::unary_op(
      a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

// Inverted dropout: zeroes entries with probability p and scales survivors by
// 1/(1-p) in training mode; identity in eval mode.
inline Var dropout(Var a, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return a;
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  std::vector<double> mask(A.numel());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor Y = A;
  for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= mask[i];
  const bool req = detail::op_requires(t, {a});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi, mask](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * mask[i];
    });
  }
  return y;
}

// ---- shape ops --------------------------------------------------------------

inline Var slice(Var a, std::size_t lo, std::size_t len) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (A.shape.size() != 1 || lo + len > A.shape[0])
    throw std::invalid_argument("slice: range [" + std::to_string(lo) + ", " + std::to_string(lo + len) +
                                ") out of bounds for " + shape_str(A.shape));
  Tensor Y({len}, std::vector<double>(A.data.begin() + lo, A.data.begin() + lo + len));
  const bool req = detail::op_requires(t, {a});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi, lo, len](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t i = 0; i < len; ++i) ga[lo + i] += go[i];
    });
  }
  return y;
}

inline Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input");
  Tape& t = *xs[0].tape;
  std::vector<double> data;
  bool req = false;
  for (const Var& x : xs) {
    const Tensor& X = x.value();
    if (X.shape.size() != 1) throw std::invalid_argument("concat: expects vectors, got " + shape_str(X.shape));
    data.insert(data.end(), X.data.begin(), X.data.end());
    req = req || (t.grad_enabled() && t.requires_grad(x.idx));
  }
  Var y = t.push(Tensor::vector(std::move(data)), req);
  if (req) {
    std::vector<std::pair<std::size_t, std::size_t>> srcs;  // (idx, len)
    for (const Var& x : xs) srcs.emplace_back(x.idx, x.numel());
    const std::size_t yi = y.idx;
    t.set_backprop(yi, [srcs, yi](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      std::size_t off = 0;
      for (auto [s, len] : srcs) {
        if (tp.requires_grad(s)) {
          std::vector<double>& g = tp.grad_buf(s);
          for (std::size_t i = 0; i < len; ++i) g[i] += go[off + i];
        }
        off += len;
      }
    });
  }
  return y;
}

// stack m vectors [n] into a matrix [m×n]
inline Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  Tape& t = *rows[0].tape;
  const std::size_t n = rows[0].numel();
  std::vector<double> data;
  data.reserve(rows.size() * n);
  bool req = false;
  for (const Var& r : rows) {
    const Tensor& X = r.value();
    if (X.shape.size() != 1 || X.shape[0] != n)
      throw std::invalid_argument("stack_rows: row shape mismatch " + shape_str(X.shape));
    data.insert(data.end(), X.data.begin(), X.data.end());
    req = req || (t.grad_enabled() && t.requires_grad(r.idx));
  }
  Var y = t.push(Tensor::matrix(rows.size(), n, std::move(data)), req);
  if (req) {
    std::vector<std::size_t> srcs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) srcs[i] = rows[i].idx;
    const std::size_t yi = y.idx;
    t.set_backprop(yi, [srcs, yi, n](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      for (std::size_t r = 0; r < srcs.size(); ++r) {
        if (!tp.requires_grad(srcs[r])) continue;
        std::vector<double>& g = tp.grad_buf(srcs[r]);
        for (std::size_t j = 0; j < n; ++j) g[j] += go[r * n + j];
      }
    });
  }
  return y;
}

// ---- reductions -------------------------------------------------------------

// column-wise max of [m×n] -> [n]; ties take the earliest row
inline Var max_rows(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (A.shape.size() != 2) throw std::invalid_argument("max_rows: expects a matrix, got " + shape_str(A.shape));
  const std::size_t m = A.shape[0], n = A.shape[1];
  Tensor Y = Tensor::zeros({n});
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = A.data[j];
    std::size_t bi = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (A.data[i * n + j] > best) {
        best = A.data[i * n + j];
        bi = i;
      }
    }
    Y.data[j] = best;
    argmax[j] = bi;
  }
  const bool req = detail::op_requires(t, {a});
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi, argmax, n](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t j = 0; j < n; ++j) ga[argmax[j] * n + j] += go[j];
    });
  }
  return y;
}

inline Var sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.data) s += v;
  if (!std::isfinite(s)) throw std::runtime_error("sum: produced a non-finite value");
  const bool req = detail::op_requires(t, {a});
  Var y = t.push(Tensor::scalar(s), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi](Tape& tp) {
      const double go = tp.grad_buf(yi)[0];
      std::vector<double>& ga = tp.grad_buf(ai);
      for (double& g : ga) g += go;
    });
  }
  return y;
}

inline Var pick(Var a, std::size_t i) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (A.shape.size() != 1 || i >= A.shape[0])
    throw std::invalid_argument("pick: index " + std::to_string(i) + " out of bounds for " + shape_str(A.shape));
  const bool req = detail::op_requires(t, {a});
  Var y = t.push(Tensor::scalar(A.data[i]), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi, i](Tape& tp) { tp.grad_buf(ai)[i] += tp.grad_buf(yi)[0]; });
  }
  return y;
}

namespace detail {

// max-shifted log sum exp over a contiguous stride; returns lse
inline double lse_span(const double* x, std::size_t n, std::size_t stride) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i * stride]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - m);
  return m + std::log(s);
}

}  // namespace detail

// log sum exp with max shift. 1-D input -> scalar; 2-D input reduces `axis`.
inline Var logsumexp(Var a, int axis = -1) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  const bool req = detail::op_requires(t, {a});
  if (A.shape.size() == 1) {
    if (A.shape[0] == 0) throw std::invalid_argument("logsumexp: empty axis");
    const double v = detail::lse_span(A.data.data(), A.shape[0], 1);
    Var y = t.push(Tensor::scalar(v), req);
    if (req) {
      const std::size_t ai = a.idx, yi = y.idx;
      t.set_backprop(yi, [ai, yi](Tape& tp) {
        const double go = tp.grad_buf(yi)[0];
        const Tensor& X = tp.value(ai);
        const double lse = tp.value(yi).data[0];
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < X.numel(); ++i) ga[i] += go * std::exp(X.data[i] - lse);
      });
    }
    return y;
  }
  if (A.shape.size() != 2 || (axis != 0 && axis != 1))
    throw std::invalid_argument("logsumexp: expects 1-D input or 2-D input with axis 0 or 1");
  const std::size_t m = A.shape[0], n = A.shape[1];
  if ((axis == 1 && n == 0) || (axis == 0 && m == 0)) throw std::invalid_argument("logsumexp: empty axis");
  const std::size_t out_len = axis == 1 ? m : n;
  Tensor Y = Tensor::zeros({out_len});
  for (std::size_t i = 0; i < out_len; ++i) {
    const double* base = axis == 1 ? &A.data[i * n] : &A.data[i];
    Y.data[i] = detail::lse_span(base, axis == 1 ? n : m, axis == 1 ? 1 : n);
  }
  check_finite(Y, "logsumexp");
  Var y = t.push(std::move(Y), req);
  if (req) {
    const std::size_t ai = a.idx, yi = y.idx;
    t.set_backprop(yi, [ai, yi, m, n, axis](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      const Tensor& X = tp.value(ai);
      const Tensor& L = tp.value(yi);
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t o = axis == 1 ? i : j;
          ga[i * n + j] += go[o] * std::exp(X.data[i * n + j] - L.data[o]);
        }
    });
  }
  return y;
}

// ---- distance / prototype ops ------------------------------------------------

// squared euclidean distance between two vectors -> scalar
inline Var sqdist(Var a, Var b) {
  Tape& t = detail::op_tape({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape || A.shape.size() != 1)
    throw std::invalid_argument("sqdist: incompatible shapes " + shape_str(A.shape) + " and " + shape_str(B.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) {
    const double d = A.data[i] - B.data[i];
    s += d * d;
  }
  if (!std::isfinite(s)) throw std::runtime_error("sqdist: produced a non-finite value");
  const bool req = detail::op_requires(t, {a, b});
  Var y = t.push(Tensor::scalar(s), req);
  if (req) {
    const std::size_t ai = a.idx, bi = b.idx, yi = y.idx;
    t.set_backprop(yi, [ai, bi, yi](Tape& tp) {
      const double go = tp.grad_buf(yi)[0];
      const Tensor& A = tp.value(ai);
      const Tensor& B = tp.value(bi);
      if (tp.requires_grad(ai)) {
        std::vector<double>& ga = tp.grad_buf(ai);
        for (std::size_t i = 0; i < A.numel(); ++i) ga[i] += go * 2.0 * (A.data[i] - B.data[i]);
      }
      if (tp.requires_grad(bi)) {
        std::vector<double>& gb = tp.grad_buf(bi);
        for (std::size_t i = 0; i < A.numel(); ++i) gb[i] -= go * 2.0 * (A.data[i] - B.data[i]);
      }
    });
  }
  return y;
}

// emissions: E[j,k] = -||R[j] - C[k]||^2 for reprs R [L×d] and centroids C [K×d]
inline Var neg_sqdist_matrix(Var r, Var c) {
  Tape& t = detail::op_tape({r, c});
  const Tensor& R = r.value();
  const Tensor& C = c.value();
  if (R.shape.size() != 2 || C.shape.size() != 2 || R.shape[1] != C.shape[1])
    throw std::invalid_argument("neg_sqdist_matrix: incompatible shapes " + shape_str(R.shape) + " and " +
                                shape_str(C.shape));
  const std::size_t L = R.shape[0], K = C.shape[0], d = R.shape[1];
  Tensor E = Tensor::zeros({L, K});
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      const double* rr = &R.data[j * d];
      const double* cc = &C.data[k * d];
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = rr[i] - cc[i];
        s += diff * diff;
      }
      E.data[j * K + k] = -s;
    }
  check_finite(E, "neg_sqdist_matrix");
  const bool req = detail::op_requires(t, {r, c});
  Var y = t.push(std::move(E), req);
  if (req) {
    const std::size_t ri = r.idx, ci = c.idx, yi = y.idx;
    t.set_backprop(yi, [ri, ci, yi, L, K, d](Tape& tp) {
      const std::vector<double>& go = tp.grad_buf(yi);
      const Tensor& R = tp.value(ri);
      const Tensor& C = tp.value(ci);
      const bool wr = tp.requires_grad(ri), wc = tp.requires_grad(ci);
      std::vector<double>* gr = wr ? &tp.grad_buf(ri) : nullptr;
      std::vector<double>* gc = wc ? &tp.grad_buf(ci) : nullptr;
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t k = 0; k < K; ++k) {
          const double g = go[j * K + k];
          if (g == 0.0) continue;
          const double* rr = &R.data[j * d];
          const double* cc = &C.data[k * d];
          for (std::size_t i = 0; i < d; ++i) {
            const double diff2 = 2.0 * (rr[i] - cc[i]);
            if (wr) (*gr)[j * d + i] -= g * diff2;
            if (wc) (*gc)[k * d + i] += g * diff2;
          }
        }
    });
  }
  return y;
}

}  // namespace protoseq
