// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "storyforge/album.hpp"
#include "storyforge/grad_check.hpp"
#include "storyforge/losses.hpp"
#include "storyforge/model_config.hpp"

namespace storyforge {

/// A small random problem for checking gradients through the whole model.
struct PipelineCheckSpec {
  std::size_t feature_dim = 8;
  std::size_t photo_hidden = 6;
  std::size_t attn_hidden = 6;
  std::size_t dec_hidden = 6;
  std::size_t embed_dim = 6;
  std::size_t vocab_size = 20;
  std::size_t photos_min = 3;
  std::size_t photos_max = 6;
  std::size_t sentences = kDefaultSentences;
  std::size_t words_max = 4;
  double lambda = kDefaultLambda;
  double mu = kDefaultMu;
  double delta = 1e-5;

  ModelConfig model() const;
};

struct PipelineCase {
  ModelConfig config;
  ParamStore params;
  AlbumExample album;
  std::vector<std::size_t> derangement;
  /// Detector decisions at the base point; held fixed while differencing.
  std::vector<std::uint8_t> flags;
};

/// Random model, album, reference story and derangement drawn from `seed`.
PipelineCase make_pipeline_case(const PipelineCheckSpec& spec, std::uint64_t seed);

/// Central-difference check of the full loss (photo encoder through
/// reconstructor) over every parameter coordinate.
GradCheckReport pipeline_grad_check(const PipelineCheckSpec& spec, std::uint64_t seed);

}  // namespace storyforge
