// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "storyforge/math.hpp"
#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

/// Turns the detector's soft score at photo i into the boundary value k_i used
/// by the graph. The returned Var must hold exactly 0 or 1.
using BoundaryDecision = std::function<Var(Var soft, std::size_t photo)>;

/// k = [soft > 0.5] forward, identity backward.
BoundaryDecision straight_through_decision();
/// Ignores the detector and uses the given flags as constants.
BoundaryDecision forced_decision(std::vector<std::uint8_t> flags);

struct BoundaryScore {
  double soft = 0.0;
  std::uint8_t flag = 0;
};

/// soft = σ(w_svᵀ v + w_shᵀ h_prev + b_s); flag = soft > 0.5.
BoundaryScore detect_boundary(const NumArray& photo, const NumArray& h_prev, const ParamStore& params);
Var boundary_score(const Binder& bind, Var photo, Var h_prev);

/// Scene segmentation on a tape. There are m + 1 slots: slot i (0-based) holds
/// the scene closed when photo i opens a new one, and slot m holds the final
/// scene. Slot 0 is always a false scene because the first photo opens scene 1
/// implicitly.
struct SceneGraph {
  std::vector<std::uint8_t> flags;
  std::vector<double> soft;
  std::vector<Var> slots;
  Mask scene_mask;
  std::size_t scene_count = 0;
  /// State fed into the scene GRU at step i, after the reset.
  std::vector<Var> entering_states;
};

struct SceneSegmentation {
  std::vector<std::uint8_t> flags;
  std::vector<double> soft;
  NumArray slots;  ///< [(m + 1) x D_v]
  Mask scene_mask;
  std::size_t scene_count = 0;
};

SceneGraph encode_scenes(const Binder& bind, std::span<const Var> photos,
                         const BoundaryDecision& decide = straight_through_decision());
SceneSegmentation encode_scenes(const ParamStore& params, const NumArray& photo_columns,
                                const BoundaryDecision& decide = straight_through_decision());

}  // namespace storyforge
