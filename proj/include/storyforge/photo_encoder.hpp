// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

/// Context-aware photo representations on a tape.
struct PhotoEncodingGraph {
  /// v_i = ReLU([fwd_i; bwd_i] + W_f f_i), one per photo, each of length 2 * H_p.
  std::vector<Var> columns;
  std::vector<Var> forward_states;
  /// backward_states[i] is the backward GRU state at photo i.
  std::vector<Var> backward_states;
  /// Forward state after the last photo.
  Var forward_final;
  /// Backward state after reaching the first photo.
  Var backward_final;
};

/// Plain-array view of an encoding.
struct PhotoEncoding {
  NumArray columns;  ///< [m x D_v], row i is v_i
  NumArray forward_final;
  NumArray backward_final;
};

/// Bidirectional GRU over the photo features (both directions start from zero)
/// plus a linear skip connection. Throws DimensionError on a feature-length
/// mismatch and Error on an empty album.
PhotoEncodingGraph encode_photos(const Binder& bind, std::span<const NumArray> features);
PhotoEncoding encode_photos(const ParamStore& params, std::span<const NumArray> features);

}  // namespace storyforge
