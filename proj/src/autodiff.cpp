#include "conad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "conad/errors.hpp"
#include "conad/kernels.hpp"

namespace conad::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::neg: return "neg";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::tanh: return "tanh";
    case OpKind::square: return "square";
    case OpKind::softplus: return "softplus";
    case OpKind::clamp: return "clamp";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::max_over_axis: return "max_over_axis";
    case OpKind::min_over_axis: return "min_over_axis";
    case OpKind::softmax_log: return "softmax_log";
    case OpKind::logsumexp: return "logsumexp";
    case OpKind::broadcast: return "broadcast";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::group_distance_stats: return "group_distance_stats";
  }
  return "unknown";
}

// --- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::leaf, std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{OpKind::leaf, std::move(value), {}, grad_enabled_, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Tensor& p) {
  if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
  const bool trainable = grad_enabled_ && !frozen_.contains(&p);
  nodes_.push_back(Node{OpKind::leaf, p, {}, trainable, {}});
  params_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

void Tape::freeze(std::span<const Tensor* const> params) {
  for (const Tensor* p : params) frozen_.insert(p);
}

std::optional<Var> Tape::find_param(const Tensor& p) const {
  if (auto it = params_.find(&p); it != params_.end()) {
    return Var(const_cast<Tape*>(this), it->second);
  }
  return std::nullopt;
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(value), std::move(inputs), needs, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

// --- Gradients --------------------------------------------------------------

const Tensor* Gradients::find(std::size_t id) const {
  if (id >= grads_.size() || !set_[id]) return nullptr;
  return &grads_[id];
}

Tensor Gradients::of(const Var& v) const {
  if (const Tensor* g = find(v.id())) return *g;
  return Tensor(v.shape(), 0.0);
}

Tensor Gradients::of_param(const Tensor& p) const {
  if (auto v = tape_->find_param(p)) {
    if (const Tensor* g = find(v->id())) return *g;
  }
  return Tensor(p.shape(), 0.0);
}

void Gradients::accumulate(std::size_t id, Tensor g) {
  if (!wants(id)) return;
  if (!set_[id]) {
    grads_[id] = std::move(g);
    set_[id] = true;
    return;
  }
  auto dst = grads_[id].data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Gradients backward(const Var& root) {
  const Tape& tape = root.tape();
  if (root.value().size() != 1) {
    throw ContractError("backward needs a single-element root, got shape " +
                        shape_string(root.shape()));
  }
  Gradients grads(tape);
  if (!root.requires_grad()) return grads;
  grads.accumulate(root.id(), Tensor(root.shape(), 1.0));
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    const auto& node = tape.node(id);
    if (!node.requires_grad || !node.backward) continue;
    const Tensor* upstream = grads.find(id);
    if (upstream == nullptr) continue;
    node.backward(*upstream, grads);
  }
  return grads;
}

// --- helpers ----------------------------------------------------------------

namespace {

[[noreturn]] void shape_fail(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
  return a.tape();
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a broadcasting binary op; each operand is indexed modulo
// its own size.
Shape broadcast_shape(OpKind kind, const Shape& a, const Shape& b) {
  if (a == b) return a;
  const auto na = shape_size(a);
  const auto nb = shape_size(b);
  if (nb == 1 && na >= 1) return a;
  if (na == 1) return b;
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  shape_fail(kind, a, b);
}

// Sum a full-size gradient down to an operand that was broadcast by repetition.
Tensor reduce_to(const Tensor& g, const Shape& shape) {
  const auto n = shape_size(shape);
  if (n == g.size()) return g.reshaped(shape);
  Tensor out(shape, 0.0);
  auto src = g.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i % n] += src[i];
  return out;
}

struct AxisLayout {
  std::size_t outer, n, inner;
  Shape reduced;
};

AxisLayout axis_layout(OpKind kind, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op_name(kind)) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_string(shape));
  }
  AxisLayout l{1, shape[axis], 1, {}};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  l.reduced = shape;
  l.reduced.erase(l.reduced.begin() + static_cast<std::ptrdiff_t>(axis));
  return l;
}

template <class Fn>
Tensor map_unary(const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

// Elementwise unary op whose derivative is a function of (x, y).
template <class Fwd, class Deriv>
Var unary(OpKind kind, const Var& x, Fwd fwd, Deriv deriv) {
  Tape& tape = x.tape();
  Tensor y = map_unary(x.value(), fwd);
  const auto xi = x.id();
  Tape* tp = &tape;
  std::size_t out_id = tape.size();
  return tape.record(kind, std::move(y), {xi},
                     [tp, xi, out_id, deriv](const Tensor& g, Gradients& grads) {
                       const Tensor& xv = tp->node(xi).value;
                       const Tensor& yv = tp->node(out_id).value;
                       Tensor gx(xv.shape());
                       auto gd = g.data();
                       auto xd = xv.data();
                       auto yd = yv.data();
                       auto out = gx.data();
                       for (std::size_t i = 0; i < out.size(); ++i) out[i] = gd[i] * deriv(xd[i], yd[i]);
                       grads.accumulate(xi, std::move(gx));
                     });
}

template <class Fwd>
Tensor map_binary(const Tensor& a, const Tensor& b, const Shape& out_shape, Fwd fwd) {
  Tensor out(out_shape);
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  const auto na = ad.size();
  const auto nb = bd.size();
  if (na == od.size() && nb == od.size()) {
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = fwd(ad[i], bd[i]);
  } else {
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = fwd(ad[i % na], bd[i % nb]);
  }
  return out;
}

// Binary broadcasting op; da/db give the partial derivatives at (a, b).
template <class Fwd, class Da, class Db>
Var binary(OpKind kind, const Var& a, const Var& b, Fwd fwd, Da da, Db db) {
  Tape& tape = same_tape(a, b);
  const Shape out_shape = broadcast_shape(kind, a.shape(), b.shape());
  Tensor y = map_binary(a.value(), b.value(), out_shape, fwd);
  const auto ai = a.id();
  const auto bi = b.id();
  Tape* tp = &tape;
  return tape.record(kind, std::move(y), {ai, bi},
                     [tp, ai, bi, da, db](const Tensor& g, Gradients& grads) {
                       const Tensor& av = tp->node(ai).value;
                       const Tensor& bv = tp->node(bi).value;
                       const auto na = av.size();
                       const auto nb = bv.size();
                       auto gd = g.data();
                       auto ad = av.data();
                       auto bd = bv.data();
                       if (grads.wants(ai)) {
                         Tensor full(g.shape());
                         auto fd = full.data();
                         for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = gd[i] * da(ad[i % na], bd[i % nb]);
                         grads.accumulate(ai, reduce_to(full, av.shape()));
                       }
                       if (grads.wants(bi)) {
                         Tensor full(g.shape());
                         auto fd = full.data();
                         for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = gd[i] * db(ad[i % na], bd[i % nb]);
                         grads.accumulate(bi, reduce_to(full, bv.shape()));
                       }
                     });
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var extremum_over_axis(OpKind kind, const Var& x, std::size_t axis, bool take_max) {
  Tape& tape = x.tape();
  const auto l = axis_layout(kind, x.shape(), axis);
  Tensor y(l.reduced);
  std::vector<std::size_t> arg(l.outer * l.inner);
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      std::size_t best = 0;
      double bv = xd[o * l.n * l.inner + in];
      for (std::size_t k = 1; k < l.n; ++k) {
        const double v = xd[(o * l.n + k) * l.inner + in];
        if (take_max ? v > bv : v < bv) {
          bv = v;
          best = k;
        }
      }
      yd[o * l.inner + in] = bv;
      arg[o * l.inner + in] = best;
    }
  }
  const auto xi = x.id();
  const Shape xs = x.shape();
  return tape.record(kind, std::move(y), {xi},
                     [xi, xs, l, arg = std::move(arg)](const Tensor& g, Gradients& grads) {
                       Tensor gx(xs, 0.0);
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t o = 0; o < l.outer; ++o) {
                         for (std::size_t in = 0; in < l.inner; ++in) {
                           const auto k = arg[o * l.inner + in];
                           out[(o * l.n + k) * l.inner + in] = gd[o * l.inner + in];
                         }
                       }
                       grads.accumulate(xi, std::move(gx));
                     });
}

}  // namespace

// --- ops --------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) shape_fail(OpKind::matmul, as, bs);
  const std::size_t m = as[0], k = as[1], n = bs[1];
  Tensor y(Shape{m, n});
  kernels::matmul(a.value().data(), b.value().data(), y.data(), m, k, n);
  const auto ai = a.id();
  const auto bi = b.id();
  Tape* tp = &tape;
  return tape.record(OpKind::matmul, std::move(y), {ai, bi},
                     [tp, ai, bi, m, k, n](const Tensor& g, Gradients& grads) {
                       if (grads.wants(ai)) {
                         Tensor ga(Shape{m, k}, 0.0);
                         kernels::matmul_nt_acc(g.data(), tp->node(bi).value.data(), ga.data(), m, n, k);
                         grads.accumulate(ai, std::move(ga));
                       }
                       if (grads.wants(bi)) {
                         Tensor gb(Shape{k, n}, 0.0);
                         kernels::matmul_tn_acc(tp->node(ai).value.data(), g.data(), gb.data(), m, k, n);
                         grads.accumulate(bi, std::move(gb));
                       }
                     });
}

Var add(const Var& a, const Var& b) {
  return binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("div: division by zero (denominator shape " + shape_string(b.shape()) + ")");
  }
  return binary(
      OpKind::div, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Var exp(const Var& x) {
  return unary(
      OpKind::exp, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) {
      throw DomainError("log: argument must be strictly positive, got " + std::to_string(v) +
                        " in shape " + shape_string(x.shape()));
    }
  }
  return unary(
      OpKind::log, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var neg(const Var& x) {
  return unary(
      OpKind::neg, x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      OpKind::leaky_relu, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var tanh(const Var& x) {
  return unary(
      OpKind::tanh, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var square(const Var& x) {
  return unary(
      OpKind::square, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var softplus(const Var& x) {
  return unary(
      OpKind::softplus, x, [](double v) { return stable_softplus(v); },
      [](double v, double) { return sigmoid(v); });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      OpKind::clamp, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var scale(const Var& x, double factor) {
  return unary(
      OpKind::mul, x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double c) {
  return unary(
      OpKind::add, x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var sum(const Var& x) {
  Tape& tape = x.tape();
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const auto xi = x.id();
  const Shape xs = x.shape();
  return tape.record(OpKind::sum, Tensor::scalar(s), {xi},
                     [xi, xs](const Tensor& g, Gradients& grads) {
                       grads.accumulate(xi, Tensor(xs, g.item()));
                     });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var sum(const Var& x, std::size_t axis) {
  Tape& tape = x.tape();
  const auto l = axis_layout(OpKind::sum, x.shape(), axis);
  Tensor y(l.reduced, 0.0);
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t k = 0; k < l.n; ++k)
      for (std::size_t in = 0; in < l.inner; ++in)
        yd[o * l.inner + in] += xd[(o * l.n + k) * l.inner + in];
  const auto xi = x.id();
  const Shape xs = x.shape();
  return tape.record(OpKind::sum, std::move(y), {xi},
                     [xi, xs, l](const Tensor& g, Gradients& grads) {
                       Tensor gx(xs);
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t k = 0; k < l.n; ++k)
                           for (std::size_t in = 0; in < l.inner; ++in)
                             out[(o * l.n + k) * l.inner + in] = gd[o * l.inner + in];
                       grads.accumulate(xi, std::move(gx));
                     });
}

Var mean(const Var& x, std::size_t axis) {
  const auto n = axis_layout(OpKind::mean, x.shape(), axis).n;
  return scale(sum(x, axis), 1.0 / static_cast<double>(n));
}

Var max_over_axis(const Var& x, std::size_t axis) {
  return extremum_over_axis(OpKind::max_over_axis, x, axis, true);
}

Var min_over_axis(const Var& x, std::size_t axis) {
  return extremum_over_axis(OpKind::min_over_axis, x, axis, false);
}

Var logsumexp(const Var& x, std::size_t axis) {
  Tape& tape = x.tape();
  const auto l = axis_layout(OpKind::logsumexp, x.shape(), axis);
  Tensor y(l.reduced);
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.n; ++k) m = std::max(m, xd[(o * l.n + k) * l.inner + in]);
      double s = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) s += std::exp(xd[(o * l.n + k) * l.inner + in] - m);
      yd[o * l.inner + in] = m + std::log(s);
    }
  }
  const auto xi = x.id();
  Tape* tp = &tape;
  const std::size_t out_id = tape.size();
  return tape.record(OpKind::logsumexp, std::move(y), {xi},
                     [tp, xi, out_id, l](const Tensor& g, Gradients& grads) {
                       const Tensor& xv = tp->node(xi).value;
                       const Tensor& yv = tp->node(out_id).value;
                       Tensor gx(xv.shape());
                       auto xd = xv.data();
                       auto yd = yv.data();
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t k = 0; k < l.n; ++k)
                           for (std::size_t in = 0; in < l.inner; ++in) {
                             const auto r = o * l.inner + in;
                             const auto i = (o * l.n + k) * l.inner + in;
                             out[i] = gd[r] * std::exp(xd[i] - yd[r]);
                           }
                       grads.accumulate(xi, std::move(gx));
                     });
}

Var log_softmax(const Var& x, std::size_t axis) {
  Tape& tape = x.tape();
  const auto l = axis_layout(OpKind::softmax_log, x.shape(), axis);
  Tensor y(x.shape());
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.n; ++k) m = std::max(m, xd[(o * l.n + k) * l.inner + in]);
      double s = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) s += std::exp(xd[(o * l.n + k) * l.inner + in] - m);
      const double lse = m + std::log(s);
      for (std::size_t k = 0; k < l.n; ++k) {
        const auto i = (o * l.n + k) * l.inner + in;
        yd[i] = xd[i] - lse;
      }
    }
  }
  const auto xi = x.id();
  Tape* tp = &tape;
  const std::size_t out_id = tape.size();
  return tape.record(OpKind::softmax_log, std::move(y), {xi},
                     [tp, xi, out_id, l](const Tensor& g, Gradients& grads) {
                       const Tensor& yv = tp->node(out_id).value;
                       Tensor gx(yv.shape());
                       auto yd = yv.data();
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t in = 0; in < l.inner; ++in) {
                           double gs = 0.0;
                           for (std::size_t k = 0; k < l.n; ++k) gs += gd[(o * l.n + k) * l.inner + in];
                           for (std::size_t k = 0; k < l.n; ++k) {
                             const auto i = (o * l.n + k) * l.inner + in;
                             out[i] = gd[i] - std::exp(yd[i]) * gs;
                           }
                         }
                       grads.accumulate(xi, std::move(gx));
                     });
}

Var broadcast_to(const Var& x, const Shape& shape) {
  Tape& tape = x.tape();
  const Shape& xs = x.shape();
  const auto n_out = shape_size(shape);
  const auto n_in = x.value().size();
  // Each output index i maps to input index (i / block) % n_in.
  std::size_t block = 1;
  if (xs == shape) {
    block = 1;
  } else if (is_suffix(xs, shape)) {
    block = 1;
  } else if (xs.size() == shape.size()) {
    std::size_t first = xs.size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] != shape[i]) {
        first = i;
        break;
      }
    }
    for (std::size_t i = first; i < xs.size(); ++i) {
      if (xs[i] != 1) shape_fail(OpKind::broadcast, xs, shape);
    }
    for (std::size_t i = first; i < shape.size(); ++i) block *= shape[i];
  } else {
    shape_fail(OpKind::broadcast, xs, shape);
  }
  Tensor y(shape);
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t i = 0; i < n_out; ++i) yd[i] = xd[(i / block) % n_in];
  const auto xi = x.id();
  return tape.record(OpKind::broadcast, std::move(y), {xi},
                     [xi, xs, block, n_in](const Tensor& g, Gradients& grads) {
                       Tensor gx(xs, 0.0);
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t i = 0; i < gd.size(); ++i) out[(i / block) % n_in] += gd[i];
                       grads.accumulate(xi, std::move(gx));
                     });
}

Var reshape(const Var& x, const Shape& shape) {
  Tape& tape = x.tape();
  if (shape_size(shape) != x.value().size()) shape_fail(OpKind::reshape, x.shape(), shape);
  Tensor y = x.value().reshaped(shape);
  const auto xi = x.id();
  const Shape xs = x.shape();
  return tape.record(OpKind::reshape, std::move(y), {xi},
                     [xi, xs](const Tensor& g, Gradients& grads) {
                       grads.accumulate(xi, g.reshaped(xs));
                     });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (&p.tape() != &tape) throw ContractError("concat: operands live on different tapes");
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail(OpKind::concat, first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_fail(OpKind::concat, first, s);
    }
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
    ids.push_back(p.id());
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t total = out_shape[axis];

  Tensor y(out_shape);
  auto yd = y.data();
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].value().data();
    const auto w = widths[p];
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * w * inner), w * inner,
                  yd.begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
    }
    offset += w;
  }
  Tape* tp = &tape;
  return tape.record(OpKind::concat, std::move(y), ids,
                     [tp, ids, widths, outer, inner, total](const Tensor& g, Gradients& grads) {
                       auto gd = g.data();
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < ids.size(); ++p) {
                         const auto w = widths[p];
                         if (grads.wants(ids[p])) {
                           Tensor gp(tp->node(ids[p]).value.shape());
                           auto out = gp.data();
                           for (std::size_t o = 0; o < outer; ++o) {
                             std::copy_n(gd.begin() + static_cast<std::ptrdiff_t>((o * total + off) * inner),
                                         w * inner,
                                         out.begin() + static_cast<std::ptrdiff_t>(o * w * inner));
                           }
                           grads.accumulate(ids[p], std::move(gp));
                         }
                         off += w;
                       }
                     });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tape = x.tape();
  const Shape xs = x.shape();
  if (axis >= xs.size() || begin >= end || end > xs[axis]) {
    throw ShapeError("slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " of " + shape_string(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  const auto n = xs[axis];
  const auto w = end - begin;
  Shape ys = xs;
  ys[axis] = w;
  Tensor y(ys);
  auto xd = x.value().data();
  auto yd = y.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>((o * n + begin) * inner), w * inner,
                yd.begin() + static_cast<std::ptrdiff_t>(o * w * inner));
  }
  const auto xi = x.id();
  return tape.record(OpKind::slice, std::move(y), {xi},
                     [xi, xs, outer, inner, n, w, begin](const Tensor& g, Gradients& grads) {
                       Tensor gx(xs, 0.0);
                       auto gd = g.data();
                       auto out = gx.data();
                       for (std::size_t o = 0; o < outer; ++o) {
                         std::copy_n(gd.begin() + static_cast<std::ptrdiff_t>(o * w * inner), w * inner,
                                     out.begin() + static_cast<std::ptrdiff_t>((o * n + begin) * inner));
                       }
                       grads.accumulate(xi, std::move(gx));
                     });
}

Var group_distance_stats(const Var& x, std::size_t group_size, bool allow_ragged) {
  Tape& tape = x.tape();
  const Shape xs = x.shape();
  if (xs.size() != 2) throw ShapeError("group_distance_stats: need (n, d), got " + shape_string(xs));
  if (group_size == 0) throw ShapeError("group_distance_stats: group size must be positive");
  const std::size_t n = xs[0], d = xs[1];
  if (!allow_ragged && n % group_size != 0) {
    throw ShapeError("group_distance_stats: " + std::to_string(n) + " rows do not split into groups of " +
                     std::to_string(group_size));
  }
  auto xd = x.value().data();
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = xd[i * d + q] - xd[j * d + q];
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  struct Group {
    std::size_t begin, end, min_i, min_j;
  };
  std::vector<Group> groups;
  Tensor y(Shape{n, 2}, 0.0);
  auto yd = y.data();
  for (std::size_t begin = 0; begin < n; begin += group_size) {
    const std::size_t end = std::min(n, begin + group_size);
    Group grp{begin, end, begin, begin};
    double total = 0.0, best = std::numeric_limits<double>::infinity();
    std::size_t pairs = 0;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = i + 1; j < end; ++j) {
        const double dij = dist(i, j);
        total += dij;
        ++pairs;
        if (dij < best) {
          best = dij;
          grp.min_i = i;
          grp.min_j = j;
        }
      }
    }
    const double m = pairs ? total / static_cast<double>(pairs) : 0.0;
    const double mn = pairs ? best : 0.0;
    for (std::size_t r = begin; r < end; ++r) {
      yd[r * 2] = m;
      yd[r * 2 + 1] = mn;
    }
    groups.push_back(grp);
  }

  const auto xi = x.id();
  Tape* tp = &tape;
  return tape.record(
      OpKind::group_distance_stats, std::move(y), {xi},
      [tp, xi, n, d, groups = std::move(groups)](const Tensor& g, Gradients& grads) {
        const Tensor& xv = tp->node(xi).value;
        auto xd = xv.data();
        auto gd = g.data();
        Tensor gx(Shape{n, d}, 0.0);
        auto out = gx.data();
        // Adds w * d(dist(i,j))/dx to the gradient.
        auto push = [&](std::size_t i, std::size_t j, double w) {
          double s = 0.0;
          for (std::size_t q = 0; q < d; ++q) {
            const double diff = xd[i * d + q] - xd[j * d + q];
            s += diff * diff;
          }
          const double dij = std::sqrt(s);
          if (dij == 0.0) return;
          for (std::size_t q = 0; q < d; ++q) {
            const double c = w * (xd[i * d + q] - xd[j * d + q]) / dij;
            out[i * d + q] += c;
            out[j * d + q] -= c;
          }
        };
        for (const auto& grp : groups) {
          const std::size_t m = grp.end - grp.begin;
          if (m < 2) continue;
          double g_mean = 0.0, g_min = 0.0;
          for (std::size_t r = grp.begin; r < grp.end; ++r) {
            g_mean += gd[r * 2];
            g_min += gd[r * 2 + 1];
          }
          const double pairs = static_cast<double>(m * (m - 1) / 2);
          for (std::size_t i = grp.begin; i < grp.end; ++i)
            for (std::size_t j = i + 1; j < grp.end; ++j) push(i, j, g_mean / pairs);
          push(grp.min_i, grp.min_j, g_min);
        }
        grads.accumulate(xi, std::move(gx));
      });
}

}  // namespace conad::ad
