// SPDX-License-Identifier: Apache-2.0
#include "storyforge/reconstructor.hpp"

#include "storyforge/errors.hpp"
#include "storyforge/gru.hpp"
#include "storyforge/model_config.hpp"

namespace storyforge {

Var reconstruct(const Binder& bind, std::span<const Var> logits) {
  if (logits.empty()) throw Error("reconstruct: empty logits sequence");
  const GruVars gru = bind_gru(bind, names::kReconGru);
  const std::size_t hidden = gru.hidden_to_gates.array().cols();
  const Var pooled = ops::mean(logits);
  Var c = bind.tape().zeros(hidden);
  std::vector<Var> states;
  states.reserve(logits.size());
  for (const Var& d : logits) {
    c = ops::gru_cell(ops::concat(d, pooled), c, gru);
    states.push_back(c);
  }
  return ops::mean(states);
}

NumArray reconstruct(const ParamStore& params, std::span<const NumArray> logits) {
  Tape tape;
  Binder bind(tape, params);
  std::vector<Var> vars;
  for (const auto& d : logits) vars.push_back(tape.constant(d));
  return reconstruct(bind, vars).array();
}

}  // namespace storyforge
