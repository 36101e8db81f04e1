#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "conad/tensor.hpp"

// Define-by-run reverse-mode automatic differentiation.
//
// A Tape records every operation applied to Vars in topological order. A Var is
// a cheap handle (tape pointer + node index). Gradients are obtained by
// calling backward() on a scalar root, which walks the tape once in reverse.
//
// Binary elementwise ops broadcast only by trailing-dimension expansion: one
// operand's shape must equal the other's, be a suffix of it, or hold a single
// element. Everything else throws ShapeError.
namespace conad::ad {

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul,
  div,
  exp,
  log,
  neg,
  leaky_relu,
  tanh,
  square,
  softplus,
  clamp,
  sum,
  mean,
  max_over_axis,
  min_over_axis,
  softmax_log,
  logsumexp,
  broadcast,
  reshape,
  concat,
  slice,
  group_distance_stats,
};

std::string_view op_name(OpKind kind);

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients;

class Tape {
 public:
  // Accumulates the node's incoming gradient into its inputs' slots.
  using BackwardFn = std::function<void(const Tensor& upstream, Gradients& grads)>;

  struct Node {
    OpKind kind;
    Tensor value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Leaf for a model parameter. Repeated calls with the same tensor return the
  // same Var. The leaf requires grad unless the tensor was frozen or gradients
  // are disabled on this tape.
  Var param(const Tensor& p);
  void freeze(std::span<const Tensor* const> params);
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  // Var previously bound to this parameter, if any.
  std::optional<Var> find_param(const Tensor& p) const;

  Var record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  std::unordered_set<const Tensor*> frozen_;
  bool grad_enabled_ = true;
};

// Gradient map produced by backward(); indexed by node id.
class Gradients {
 public:
  explicit Gradients(const Tape& tape)
      : tape_(&tape), grads_(tape.size()), set_(tape.size(), false) {}

  // Gradient of a node, or nullptr if nothing flowed into it.
  const Tensor* find(std::size_t id) const;
  const Tensor* find(const Var& v) const { return find(v.id()); }
  // Zeros when nothing flowed into the node.
  Tensor of(const Var& v) const;
  // Gradient with respect to a bound parameter; zeros when the parameter was
  // unused on the tape or received no gradient.
  Tensor of_param(const Tensor& p) const;

  // True when the node participates in differentiation.
  bool wants(std::size_t id) const { return tape_->node(id).requires_grad; }
  void accumulate(std::size_t id, Tensor g);

 private:
  const Tape* tape_;
  std::vector<Tensor> grads_;
  std::vector<bool> set_;
};

// Reverse pass from a single-element root. Throws ContractError otherwise.
Gradients backward(const Var& root);

// --- operations -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var exp(const Var& x);
Var log(const Var& x);
Var neg(const Var& x);
Var leaky_relu(const Var& x, double slope = 0.2);
Var tanh(const Var& x);
Var square(const Var& x);
Var softplus(const Var& x);
// Gradient passes only where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);
Var sum(const Var& x, std::size_t axis);
Var mean(const Var& x);
Var mean(const Var& x, std::size_t axis);
// Reductions over one axis; ties resolve to the lowest index, which also
// receives the whole gradient.
Var max_over_axis(const Var& x, std::size_t axis);
Var min_over_axis(const Var& x, std::size_t axis);
Var log_softmax(const Var& x, std::size_t axis);
Var logsumexp(const Var& x, std::size_t axis);

// Trailing-dimension expansion: x's shape must be a suffix of `shape`, or
// equal to it except for size-1 trailing axes.
Var broadcast_to(const Var& x, const Shape& shape);
Var reshape(const Var& x, const Shape& shape);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

// For x of shape (n, d), rows are split into consecutive groups of
// `group_size` (the last may be shorter when `allow_ragged`). Every row of a
// group gets the group's (mean, min) Euclidean distance over all pairs of
// distinct rows; groups with a single row get (0, 0). Output shape (n, 2).
Var group_distance_stats(const Var& x, std::size_t group_size, bool allow_ragged = false);

Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double c);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }

}  // namespace conad::ad
