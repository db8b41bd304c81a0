// SPDX-License-Identifier: Apache-2.0
#include "storyforge/tape.hpp"

#include <algorithm>
#include <cmath>

#include "storyforge/errors.hpp"

namespace storyforge {

Var Tape::constant(NumArray value) {
  Node node;
  node.value = std::move(value);
  node.value.drop_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  Node node;
  NumArray& entry = store.at(name);
  node.external = &entry;
  node.param = &entry;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  Node node;
  node.external = &store.at(name);
  nodes_.push_back(std::move(node));
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

const NumArray& Tape::value(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.external ? *node.external : node.value;
}

bool Tape::any_requires_grad(std::span<const Var> parents) const {
  bool any = false;
  for (const Var& p : parents) {
    if (!p.valid()) continue;
    if (&p.tape() != this) throw Error("Tape: operand recorded on a different tape");
    any = any || nodes_[p.id()].requires_grad;
  }
  return any;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(value(id).size(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw Error("Tape::backward: root belongs to another tape");
  if (root.size() != 1) throw DimensionError("Tape::backward: root must be a single value");
  for (auto& node : nodes_) node.grad.clear();
  grad_buffer(root.id())[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param) {
      auto dst = node.param->grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

namespace ops {

namespace {

void require_same_size(Var a, Var b, const char* op) {
  if (a.size() != b.size())
    throw DimensionError(std::string(op) + ": operand sizes differ (" +
                         shape_string(a.array().shape()) + " vs " +
                         shape_string(b.array().shape()) + ")");
}

NumArray like(Var a) { return NumArray(a.array().shape()); }

template <typename Fwd, typename Deriv>
Var pointwise(Var a, Fwd fwd, Deriv deriv) {
  NumArray out = like(a);
  auto x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, deriv](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto y = t.value(self).data();
    auto x = t.value(ia).data();
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_size(a, b, "add");
  NumArray out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      auto dst = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_size(a, b, "sub");
  NumArray out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    if (t.requires_grad(ia)) {
      auto dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      auto dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_size(a, b, "mul");
  NumArray out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto va = t.value(ia).data();
    auto vb = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      auto dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * va[i];
    }
  });
}

Var affine(Var a, double scale, double shift) {
  NumArray out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * a.value()[i] + shift;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, scale](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  });
}

Var scale(Var a, Var s) {
  if (s.size() != 1) throw DimensionError("scale: scalar operand has size " + std::to_string(s.size()));
  const double k = s.scalar();
  NumArray out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * k;
  const std::size_t ia = a.id(), is = s.id();
  return a.tape().push(std::move(out), {a, s}, [ia, is](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    const double k = t.value(is)[0];
    auto va = t.value(ia).data();
    if (t.requires_grad(ia)) {
      auto dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * k;
    }
    if (t.requires_grad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * va[i];
      t.grad_buffer(is)[0] += acc;
    }
  });
}

Var relu(Var a) {
  return pointwise(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return pointwise(
      a, [](double x) { return storyforge::sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return pointwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var matvec(Var w, Var x) {
  const NumArray& wa = w.array();
  if (wa.rank() != 2) throw DimensionError("matvec: weight is not a matrix " + shape_string(wa.shape()));
  const std::size_t rows = wa.rows(), cols = wa.cols();
  if (x.size() != cols)
    throw DimensionError("matvec: input of size " + std::to_string(x.size()) +
                         " does not match weight " + shape_string(wa.shape()));
  NumArray out(Shape{rows});
  storyforge::matvec(wa.data(), rows, cols, x.value(), out.data());
  const std::size_t iw = w.id(), ix = x.id();
  return w.tape().push(std::move(out), {w, x}, [iw, ix, rows, cols](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    if (t.requires_grad(iw)) outer_add(g, t.value(ix).data(), t.grad_buffer(iw));
    if (t.requires_grad(ix))
      matvec_transposed_add(t.value(iw).data(), rows, cols, g, t.grad_buffer(ix));
  });
}

Var concat(Var a, Var b) {
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> data(a.value().begin(), a.value().end());
  data.insert(data.end(), b.value().begin(), b.value().end());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(NumArray::vector(std::move(data)), {a, b},
                       [ia, ib, na, nb](Tape& t, std::size_t self) {
                         auto g = t.node_grad(self);
                         if (t.requires_grad(ia)) {
                           auto dst = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < na; ++i) dst[i] += g[i];
                         }
                         if (t.requires_grad(ib)) {
                           auto dst = t.grad_buffer(ib);
                           for (std::size_t i = 0; i < nb; ++i) dst[i] += g[na + i];
                         }
                       });
}

Var dot(Var a, Var b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(NumArray::vector({acc}), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    auto va = t.value(ia).data();
    auto vb = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * vb[i];
    }
    if (t.requires_grad(ib)) {
      auto dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * va[i];
    }
  });
}

Var sum(std::span<const Var> items) {
  if (items.empty()) throw DimensionError("sum: no operands");
  NumArray out = like(items[0]);
  for (const Var& v : items) {
    require_same_size(items[0], v, "sum");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v.value()[i];
  }
  std::vector<std::size_t> ids;
  ids.reserve(items.size());
  for (const Var& v : items) ids.push_back(v.id());
  return items[0].tape().push(std::move(out), items, [ids](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    for (std::size_t id : ids) {
      if (!t.requires_grad(id)) continue;
      auto dst = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Var mean(std::span<const Var> items) {
  if (items.empty()) throw DimensionError("mean: no operands");
  return affine(sum(items), 1.0 / static_cast<double>(items.size()), 0.0);
}

Var row(Var m, std::size_t r) {
  const NumArray& ma = m.array();
  if (ma.rank() != 2) throw DimensionError("row: operand is not a matrix");
  if (r >= ma.rows())
    throw DimensionError("row: index " + std::to_string(r) + " out of range for " +
                         shape_string(ma.shape()));
  const std::size_t cols = ma.cols();
  std::vector<double> data(ma.data().begin() + r * cols, ma.data().begin() + (r + 1) * cols);
  const std::size_t im = m.id();
  return m.tape().push(NumArray::vector(std::move(data)), {m}, [im, r, cols](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto dst = t.grad_buffer(im);
    for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += g[c];
  });
}

Var scatter(std::span<const Var> scalars, std::span<const std::size_t> positions, std::size_t n) {
  if (scalars.size() != positions.size() || scalars.empty())
    throw DimensionError("scatter: scalars and positions must be non-empty and aligned");
  NumArray out(Shape{n});
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    if (positions[k] >= n) throw DimensionError("scatter: position out of range");
    out[positions[k]] = scalars[k].scalar();
  }
  std::vector<std::size_t> ids, pos(positions.begin(), positions.end());
  for (const Var& v : scalars) ids.push_back(v.id());
  return scalars[0].tape().push(std::move(out), scalars, [ids, pos](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.requires_grad(ids[k])) t.grad_buffer(ids[k])[0] += g[pos[k]];
  });
}

Var masked_softmax(Var logits, std::span<const std::uint8_t> mask) {
  NumArray out = storyforge::masked_softmax(logits.array(), mask);
  const std::size_t il = logits.id();
  return logits.tape().push(std::move(out), {logits}, [il](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto p = t.value(self).data();
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * p[i];
    auto dst = t.grad_buffer(il);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += p[i] * (g[i] - inner);
  });
}

Var weighted_columns(std::span<const Var> columns, Var weights, std::span<const std::uint8_t> mask) {
  if (columns.size() != weights.size() || mask.size() != weights.size())
    throw DimensionError("weighted_columns: columns, weights and mask must have equal length");
  std::vector<std::size_t> active;
  std::size_t dim = 0;
  for (std::size_t l = 0; l < columns.size(); ++l) {
    if (!mask[l]) continue;
    if (!columns[l].valid()) throw DimensionError("weighted_columns: valid position without a column");
    if (dim == 0) dim = columns[l].size();
    if (columns[l].size() != dim) throw DimensionError("weighted_columns: column sizes differ");
    active.push_back(l);
  }
  if (active.empty()) throw InvalidMaskError("weighted_columns: mask has no valid position");
  NumArray out(Shape{dim});
  auto w = weights.value();
  for (std::size_t l : active)
    for (std::size_t i = 0; i < dim; ++i) out[i] += w[l] * columns[l].value()[i];

  std::vector<Var> parents{weights};
  std::vector<std::size_t> col_ids;
  for (std::size_t l : active) {
    parents.push_back(columns[l]);
    col_ids.push_back(columns[l].id());
  }
  const std::size_t iw = weights.id();
  return weights.tape().push(std::move(out), parents, [iw, active, col_ids](Tape& t, std::size_t self) {
    auto g = t.node_grad(self);
    auto w = t.value(iw).data();
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto col = t.value(col_ids[k]).data();
      if (t.requires_grad(iw)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * col[i];
        t.grad_buffer(iw)[active[k]] += acc;
      }
      if (t.requires_grad(col_ids[k])) {
        auto dst = t.grad_buffer(col_ids[k]);
        const double wl = w[active[k]];
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += wl * g[i];
      }
    }
  });
}

Var log_softmax_at(Var logits, std::size_t index) {
  if (index >= logits.size())
    throw DimensionError("log_softmax_at: index " + std::to_string(index) + " out of range " +
                         std::to_string(logits.size()));
  const double lp = storyforge::log_softmax_at(logits.value(), index);
  const std::size_t il = logits.id();
  return logits.tape().push(NumArray::vector({lp}), {logits}, [il, index](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    auto x = t.value(il).data();
    const double top = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (double v : x) total += std::exp(v - top);
    auto dst = t.grad_buffer(il);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = std::exp(x[i] - top) / total;
      dst[i] += g * ((i == index ? 1.0 : 0.0) - p);
    }
  });
}

Var step_straight_through(Var soft) {
  if (soft.size() != 1) throw DimensionError("step_straight_through: operand must be scalar");
  const double k = soft.scalar() > 0.5 ? 1.0 : 0.0;
  const std::size_t is = soft.id();
  return soft.tape().push(NumArray::vector({k}), {soft}, [is](Tape& t, std::size_t self) {
    t.grad_buffer(is)[0] += t.node_grad(self)[0];
  });
}

Var hinge(Var a) {
  return pointwise(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var squared_distance(Var a, Var b) {
  require_same_size(a, b, "squared_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(NumArray::vector({acc}), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    auto va = t.value(ia).data();
    auto vb = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += 2.0 * g * (va[i] - vb[i]);
    }
    if (t.requires_grad(ib)) {
      auto dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= 2.0 * g * (va[i] - vb[i]);
    }
  });
}

}  // namespace ops
}  // namespace storyforge
