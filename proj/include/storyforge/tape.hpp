// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "storyforge/math.hpp"
#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"

namespace storyforge {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const NumArray& array() const;
  std::span<const double> value() const;
  std::size_t size() const;
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of a computation. Values are computed eagerly; backward()
/// replays the record in reverse and accumulates gradients into the ParamStore
/// entries that were bound with param().
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(NumArray value);
  Var constant(std::vector<double> values) { return constant(NumArray::vector(std::move(values))); }
  Var scalar(double value) { return constant(NumArray::vector({value})); }
  Var zeros(std::size_t n) { return constant(NumArray::zeros(n)); }

  /// Binds a parameter as a leaf. Repeated calls with the same name return the same Var.
  Var param(ParamStore& store, const std::string& name);
  /// Read-only binding: the leaf takes part in the computation but receives no gradient.
  Var param(const ParamStore& store, const std::string& name);

  /// Seeds d(root)/d(root) = 1 and propagates. root must hold a single value.
  /// Parameter gradients are added into the bound store entries' grad slots.
  void backward(Var root);

  const NumArray& value(std::size_t id) const;
  /// Gradient of a node after backward(); empty when the node was not reached.
  std::span<const double> grad(Var v) const { return nodes_[v.id()].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Records an op result. requires_grad is derived from the parents; the
  /// backward closure is only materialized when it can be reached.
  template <class F>
  Var push(NumArray value, std::initializer_list<Var> parents, F&& backward) {
    return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::forward<F>(backward));
  }
  template <class F>
  Var push(NumArray value, std::span<const Var> parents, F&& backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = any_requires_grad(parents);
    if (node.requires_grad) node.backward = Backward(std::forward<F>(backward));
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }
  /// Gradient buffer of a node, allocated on first use.
  std::span<double> grad_buffer(std::size_t id);
  std::span<const double> node_grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  bool any_requires_grad(std::span<const Var> parents) const;

  struct Node {
    NumArray value;
    const NumArray* external = nullptr;
    NumArray* param = nullptr;
    bool requires_grad = false;
    Backward backward;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

/// Binds parameters of one store on one tape; trainable when the store is mutable.
class Binder {
 public:
  Binder(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store), mutable_(&store) {}
  Binder(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

  Var operator()(const std::string& name) const {
    return mutable_ ? tape_->param(*mutable_, name) : tape_->param(*store_, name);
  }
  Tape& tape() const { return *tape_; }
  const ParamStore& store() const { return *store_; }

 private:
  Tape* tape_;
  const ParamStore* store_;
  ParamStore* mutable_ = nullptr;
};

inline const NumArray& Var::array() const { return tape_->value(id_); }
inline std::span<const double> Var::value() const { return tape_->value(id_).data(); }
inline std::size_t Var::size() const { return tape_->value(id_).size(); }
inline double Var::scalar() const { return tape_->value(id_)[0]; }

// Differentiable operations. All operands must live on the same tape.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// scale * a + shift, elementwise.
Var affine(Var a, double scale, double shift);
/// a * s where s is a single-value Var.
Var scale(Var a, Var s);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// W x for a matrix W.
Var matvec(Var w, Var x);
Var concat(Var a, Var b);
Var dot(Var a, Var b);
/// Elementwise sum of equally shaped values.
Var sum(std::span<const Var> items);
/// Elementwise mean of equally shaped values.
Var mean(std::span<const Var> items);
/// Row r of a matrix as a vector; throws DimensionError when r is out of range.
Var row(Var m, std::size_t r);
/// Builds a length-n vector with scalars[k] placed at positions[k], zeros elsewhere.
Var scatter(std::span<const Var> scalars, std::span<const std::size_t> positions, std::size_t n);
Var masked_softmax(Var logits, std::span<const std::uint8_t> mask);
/// Σ_l weights[l] * columns[l] over positions where mask is set.
Var weighted_columns(std::span<const Var> columns, Var weights, std::span<const std::uint8_t> mask);
Var log_softmax_at(Var logits, std::size_t index);
/// Hard threshold (value > 0.5) forward; identity backward (straight-through).
Var step_straight_through(Var soft);
/// max(0, a), elementwise.
Var hinge(Var a);
/// ‖a − b‖²
Var squared_distance(Var a, Var b);

}  // namespace ops
}  // namespace storyforge
