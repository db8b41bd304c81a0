// SPDX-License-Identifier: Apache-2.0
#include "storyforge/gru.hpp"

#include <cmath>

#include "storyforge/errors.hpp"
#include "storyforge/math.hpp"

namespace storyforge {

namespace {

struct GateValues {
  std::vector<double> update, reset, candidate, reset_hidden, next;
};

void check_shapes(const NumArray& wi, const NumArray& wh, const NumArray& b, std::size_t x_size,
                  std::size_t h_size) {
  if (wh.rank() != 2 || wh.rows() != 3 * wh.cols())
    throw DimensionError("gru: hidden_to_gates must be [3H x H], got " + shape_string(wh.shape()));
  const std::size_t hidden = wh.cols();
  if (wi.rank() != 2 || wi.rows() != 3 * hidden)
    throw DimensionError("gru: input_to_gates must be [3H x I] with H=" + std::to_string(hidden) +
                         ", got " + shape_string(wi.shape()));
  if (b.size() != 3 * hidden)
    throw DimensionError("gru: bias must have 3H=" + std::to_string(3 * hidden) + " entries, got " +
                         shape_string(b.shape()));
  if (x_size != wi.cols())
    throw DimensionError("gru: input x has size " + std::to_string(x_size) + ", expected " +
                         std::to_string(wi.cols()));
  if (h_size != hidden)
    throw DimensionError("gru: h_prev has size " + std::to_string(h_size) + ", expected " +
                         std::to_string(hidden));
}

GateValues forward(std::span<const double> x, std::span<const double> h, const NumArray& wi,
                   const NumArray& wh, const NumArray& b) {
  const std::size_t H = wh.cols(), I = wi.cols();
  std::vector<double> xin(3 * H), hin(2 * H);
  matvec(wi.data(), 3 * H, I, x, xin);
  // Only the update and reset rows of the recurrent matrix see h directly.
  matvec(wh.data().subspan(0, 2 * H * H), 2 * H, H, h, hin);
  GateValues g;
  g.update.resize(H);
  g.reset.resize(H);
  g.candidate.resize(H);
  g.reset_hidden.resize(H);
  g.next.resize(H);
  for (std::size_t i = 0; i < H; ++i) {
    g.update[i] = sigmoid(xin[i] + hin[i] + b[i]);
    g.reset[i] = sigmoid(xin[H + i] + hin[H + i] + b[H + i]);
    g.reset_hidden[i] = g.reset[i] * h[i];
  }
  std::vector<double> cand(H);
  matvec(wh.data().subspan(2 * H * H, H * H), H, H, g.reset_hidden, cand);
  for (std::size_t i = 0; i < H; ++i) {
    g.candidate[i] = std::tanh(xin[2 * H + i] + cand[i] + b[2 * H + i]);
    g.next[i] = (1.0 - g.update[i]) * h[i] + g.update[i] * g.candidate[i];
  }
  return g;
}

}  // namespace

void GruWeights::validate() const {
  check_shapes(input_to_gates, hidden_to_gates, bias, input_to_gates.cols(), hidden_to_gates.cols());
}

GruNames add_gru(ParamStore& store, const std::string& prefix, const std::string& group,
                 std::size_t input, std::size_t hidden) {
  GruNames names(prefix);
  store.add(names.input_to_gates, group, NumArray(Shape{3 * hidden, input}));
  store.add(names.hidden_to_gates, group, NumArray(Shape{3 * hidden, hidden}));
  store.add(names.bias, group, NumArray(Shape{3 * hidden}));
  return names;
}

GruWeights gru_weights(const ParamStore& store, const std::string& prefix) {
  GruNames names(prefix);
  return GruWeights{store.at(names.input_to_gates), store.at(names.hidden_to_gates),
                    store.at(names.bias)};
}

GruVars bind_gru(const Binder& bind, const std::string& prefix) {
  GruNames names(prefix);
  return GruVars{bind(names.input_to_gates), bind(names.hidden_to_gates), bind(names.bias)};
}

NumArray gru_cell(const NumArray& x, const NumArray& h_prev, const GruWeights& w) {
  check_shapes(w.input_to_gates, w.hidden_to_gates, w.bias, x.size(), h_prev.size());
  GateValues g = forward(x.data(), h_prev.data(), w.input_to_gates, w.hidden_to_gates, w.bias);
  return NumArray::vector(std::move(g.next));
}

namespace ops {

Var gru_cell(Var x, Var h_prev, const GruVars& w) {
  const NumArray& wi = w.input_to_gates.array();
  const NumArray& wh = w.hidden_to_gates.array();
  const NumArray& b = w.bias.array();
  check_shapes(wi, wh, b, x.size(), h_prev.size());
  GateValues g = forward(x.value(), h_prev.value(), wi, wh, b);
  NumArray out = NumArray::vector(g.next);

  const std::size_t ix = x.id(), ih = h_prev.id(), iwi = w.input_to_gates.id(),
                    iwh = w.hidden_to_gates.id(), ib = w.bias.id();
  auto backward = [ix, ih, iwi, iwh, ib, g = std::move(g)](Tape& t, std::size_t self) {
    auto gout = t.node_grad(self);
    const NumArray& wi = t.value(iwi);
    const NumArray& wh = t.value(iwh);
    auto h = t.value(ih).data();
    const std::size_t H = wh.cols(), I = wi.cols();

    std::vector<double> da(3 * H), dh(H), dreset_hidden(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
      const double z = g.update[i], n = g.candidate[i];
      dh[i] = gout[i] * (1.0 - z);
      da[i] = gout[i] * (n - h[i]) * z * (1.0 - z);
      da[2 * H + i] = gout[i] * z * (1.0 - n * n);
    }
    auto wh_cand = wh.data().subspan(2 * H * H, H * H);
    matvec_transposed_add(wh_cand, H, H, std::span<const double>(da).subspan(2 * H, H), dreset_hidden);
    for (std::size_t i = 0; i < H; ++i) {
      const double r = g.reset[i];
      da[H + i] = dreset_hidden[i] * h[i] * r * (1.0 - r);
      dh[i] += dreset_hidden[i] * r;
    }
    std::span<const double> da_zr(da.data(), 2 * H);
    matvec_transposed_add(wh.data().subspan(0, 2 * H * H), 2 * H, H, da_zr, dh);

    if (t.requires_grad(ib)) {
      auto dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < 3 * H; ++i) dst[i] += da[i];
    }
    if (t.requires_grad(iwi)) outer_add(da, t.value(ix).data(), t.grad_buffer(iwi));
    if (t.requires_grad(iwh)) {
      auto dst = t.grad_buffer(iwh);
      outer_add(da_zr, h, dst.subspan(0, 2 * H * H));
      outer_add(std::span<const double>(da).subspan(2 * H, H), g.reset_hidden,
                dst.subspan(2 * H * H, H * H));
    }
    if (t.requires_grad(ix)) matvec_transposed_add(wi.data(), 3 * H, I, da, t.grad_buffer(ix));
    if (t.requires_grad(ih)) {
      auto dst = t.grad_buffer(ih);
      for (std::size_t i = 0; i < H; ++i) dst[i] += dh[i];
    }
  };
  return x.tape().push(std::move(out), {x, h_prev, w.input_to_gates, w.hidden_to_gates, w.bias},
                       std::move(backward));
}

}  // namespace ops
}  // namespace storyforge
