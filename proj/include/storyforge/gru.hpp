// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

// Gate convention, rows stacked as [update; reset; candidate]:
//   z  = σ(W_z x + U_z h + b_z)
//   r  = σ(W_r x + U_r h + b_r)
//   ĥ  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//   h' = (1 − z) ⊙ h + z ⊙ ĥ

/// Weights of one GRU: input_to_gates [3H x I], hidden_to_gates [3H x H], bias [3H].
struct GruWeights {
  NumArray input_to_gates;
  NumArray hidden_to_gates;
  NumArray bias;

  std::size_t input_size() const { return input_to_gates.cols(); }
  std::size_t hidden_size() const { return hidden_to_gates.cols(); }
  /// Throws DimensionError naming the inconsistent matrix.
  void validate() const;
};

/// Parameter names of a GRU registered under a dotted prefix.
struct GruNames {
  std::string input_to_gates, hidden_to_gates, bias;
  explicit GruNames(const std::string& prefix)
      : input_to_gates(prefix + ".w_ih"), hidden_to_gates(prefix + ".w_hh"), bias(prefix + ".b") {}
};

/// Registers a GRU's three tensors (zero-initialized) in the store.
GruNames add_gru(ParamStore& store, const std::string& prefix, const std::string& group,
                 std::size_t input, std::size_t hidden);
GruWeights gru_weights(const ParamStore& store, const std::string& prefix);

/// The same weights bound on a tape.
struct GruVars {
  Var input_to_gates;
  Var hidden_to_gates;
  Var bias;
};

GruVars bind_gru(const Binder& bind, const std::string& prefix);

/// One recurrence step on plain arrays. Throws DimensionError on shape mismatch.
NumArray gru_cell(const NumArray& x, const NumArray& h_prev, const GruWeights& w);

namespace ops {
/// Differentiable GRU step with a fused backward.
Var gru_cell(Var x, Var h_prev, const GruVars& w);
}  // namespace ops

}  // namespace storyforge
