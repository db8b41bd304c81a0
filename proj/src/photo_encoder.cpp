// SPDX-License-Identifier: Apache-2.0
#include "storyforge/photo_encoder.hpp"

#include "storyforge/errors.hpp"
#include "storyforge/gru.hpp"
#include "storyforge/model_config.hpp"

namespace storyforge {

PhotoEncodingGraph encode_photos(const Binder& bind, std::span<const NumArray> features) {
  if (features.empty()) throw Error("encode_photos: album has no photos");
  Tape& tape = bind.tape();
  const GruVars fwd = bind_gru(bind, names::kPhotoForward);
  const GruVars bwd = bind_gru(bind, names::kPhotoBackward);
  const Var skip = bind(names::kPhotoSkip);
  const std::size_t hidden = fwd.hidden_to_gates.array().cols();
  const std::size_t dim = skip.array().cols();
  const std::size_t m = features.size();

  std::vector<Var> inputs;
  inputs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (features[i].size() != dim)
      throw DimensionError("encode_photos: photo " + std::to_string(i) + " has feature length " +
                           std::to_string(features[i].size()) + ", expected " + std::to_string(dim));
    inputs.push_back(tape.constant(features[i]));
  }

  PhotoEncodingGraph out;
  Var h = tape.zeros(hidden);
  for (std::size_t i = 0; i < m; ++i) {
    h = ops::gru_cell(inputs[i], h, fwd);
    out.forward_states.push_back(h);
  }
  out.forward_final = h;

  out.backward_states.resize(m);
  h = tape.zeros(hidden);
  for (std::size_t i = m; i-- > 0;) {
    h = ops::gru_cell(inputs[i], h, bwd);
    out.backward_states[i] = h;
  }
  out.backward_final = h;

  for (std::size_t i = 0; i < m; ++i) {
    Var both = ops::concat(out.forward_states[i], out.backward_states[i]);
    out.columns.push_back(ops::relu(ops::add(both, ops::matvec(skip, inputs[i]))));
  }
  return out;
}

PhotoEncoding encode_photos(const ParamStore& params, std::span<const NumArray> features) {
  Tape tape;
  Binder bind(tape, params);
  PhotoEncodingGraph g = encode_photos(bind, features);
  const std::size_t dv = g.columns.front().size();
  std::vector<double> data;
  for (const Var& v : g.columns) data.insert(data.end(), v.value().begin(), v.value().end());
  return PhotoEncoding{NumArray::matrix(g.columns.size(), dv, std::move(data)),
                       g.forward_final.array(), g.backward_final.array()};
}

}  // namespace storyforge
