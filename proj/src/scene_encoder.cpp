// SPDX-License-Identifier: Apache-2.0
#include "storyforge/scene_encoder.hpp"

#include "storyforge/errors.hpp"
#include "storyforge/gru.hpp"
#include "storyforge/model_config.hpp"

namespace storyforge {

BoundaryDecision straight_through_decision() {
  return [](Var soft, std::size_t) { return ops::step_straight_through(soft); };
}

BoundaryDecision forced_decision(std::vector<std::uint8_t> flags) {
  return [flags = std::move(flags)](Var soft, std::size_t photo) {
    if (photo >= flags.size()) throw DimensionError("forced_decision: no flag for photo " + std::to_string(photo));
    return soft.tape().scalar(flags[photo] ? 1.0 : 0.0);
  };
}

Var boundary_score(const Binder& bind, Var photo, Var h_prev) {
  Var logit = ops::add(ops::add(ops::dot(bind(names::kDetectorPhoto), photo),
                                ops::dot(bind(names::kDetectorHidden), h_prev)),
                       bind(names::kDetectorBias));
  return ops::sigmoid(logit);
}

BoundaryScore detect_boundary(const NumArray& photo, const NumArray& h_prev, const ParamStore& params) {
  Tape tape;
  Binder bind(tape, params);
  const double soft = boundary_score(bind, tape.constant(photo), tape.constant(h_prev)).scalar();
  return {soft, static_cast<std::uint8_t>(soft > 0.5 ? 1 : 0)};
}

SceneGraph encode_scenes(const Binder& bind, std::span<const Var> photos, const BoundaryDecision& decide) {
  if (photos.empty()) throw Error("encode_scenes: album has no photos");
  Tape& tape = bind.tape();
  const GruVars gru = bind_gru(bind, names::kSceneGru);
  const std::size_t dim = gru.hidden_to_gates.array().cols();
  const std::size_t m = photos.size();

  SceneGraph out;
  Var h = tape.zeros(dim);
  for (std::size_t i = 0; i < m; ++i) {
    const Var soft = boundary_score(bind, photos[i], h);
    const Var k = decide(soft, i);
    const double kv = k.scalar();
    if (kv != 0.0 && kv != 1.0) throw Error("encode_scenes: boundary decision must be 0 or 1");
    const std::uint8_t flag = kv == 1.0 ? 1 : 0;
    out.soft.push_back(soft.scalar());
    out.flags.push_back(flag);

    if (i == 0) {
      out.slots.push_back(tape.zeros(dim));
      out.scene_mask.push_back(0);
    } else {
      // k * h: the closed scene when k = 1, an all-zero false scene otherwise.
      out.slots.push_back(ops::scale(h, k));
      out.scene_mask.push_back(flag);
    }
    h = ops::scale(h, ops::affine(k, -1.0, 1.0));
    out.entering_states.push_back(h);
    h = ops::gru_cell(photos[i], h, gru);
  }
  out.slots.push_back(h);
  out.scene_mask.push_back(1);
  for (auto flag : out.scene_mask) out.scene_count += flag;
  return out;
}

SceneSegmentation encode_scenes(const ParamStore& params, const NumArray& photo_columns,
                                const BoundaryDecision& decide) {
  if (photo_columns.rank() != 2) throw DimensionError("encode_scenes: photo columns must be a matrix");
  Tape tape;
  Binder bind(tape, params);
  std::vector<Var> photos;
  const std::size_t dv = photo_columns.cols();
  for (std::size_t i = 0; i < photo_columns.rows(); ++i) {
    std::vector<double> row(photo_columns.data().begin() + i * dv,
                            photo_columns.data().begin() + (i + 1) * dv);
    photos.push_back(tape.constant(std::move(row)));
  }
  SceneGraph g = encode_scenes(bind, photos, decide);
  std::vector<double> data;
  for (const Var& v : g.slots) data.insert(data.end(), v.value().begin(), v.value().end());
  return SceneSegmentation{g.flags, g.soft, NumArray::matrix(g.slots.size(), g.slots.front().size(), std::move(data)),
                           g.scene_mask, g.scene_count};
}

}  // namespace storyforge
