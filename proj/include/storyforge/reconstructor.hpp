// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

/// Rebuilds an album representation from one sentence's logits:
///   d̄ = mean_t d_t,  c_t = GRU([d_t, d̄], c_{t−1}) with c_0 = 0,  z̃ = mean_t c_t.
/// Throws Error on an empty sequence and DimensionError on a logit length
/// that does not match the reconstructor's input.
Var reconstruct(const Binder& bind, std::span<const Var> logits);
NumArray reconstruct(const ParamStore& params, std::span<const NumArray> logits);

}  // namespace storyforge
