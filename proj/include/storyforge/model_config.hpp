// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "storyforge/album.hpp"
#include "storyforge/param_store.hpp"

namespace storyforge {

/// Model dimensions. Derived sizes: scene_dim (D_v) = 2 * photo_hidden and
/// attention_length (L_max) = 2 * max_photos + 1.
struct ModelConfig {
  std::size_t feature_dim = 2048;
  std::size_t photo_hidden = 16;
  std::size_t attn_hidden = 32;
  std::size_t dec_hidden = 32;
  std::size_t embed_dim = 32;
  std::size_t vocab_size = 0;
  std::size_t max_photos = kDefaultMaxPhotos;
  std::size_t max_words = kDefaultMaxWords;
  std::size_t sentences = kDefaultSentences;

  std::size_t scene_dim() const { return 2 * photo_hidden; }
  std::size_t attention_length() const { return 2 * max_photos + 1; }
  DataLimits data_limits() const { return {max_photos, max_words, sentences, feature_dim}; }

  /// Throws ConfigError on non-positive sizes.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

namespace groups {
inline const std::string kPhotoEncoder = "photo_encoder";
inline const std::string kSceneEncoder = "scene_encoder";
inline const std::string kAttention = "attention";
inline const std::string kSentenceDecoder = "sentence_decoder";
inline const std::string kReconstructor = "reconstructor";
}  // namespace groups

namespace names {
inline const std::string kPhotoForward = "photo.fwd";
inline const std::string kPhotoBackward = "photo.bwd";
inline const std::string kPhotoSkip = "photo.w_f";
inline const std::string kSceneGru = "scene.gru";
inline const std::string kDetectorPhoto = "scene.detector.w_sv";
inline const std::string kDetectorHidden = "scene.detector.w_sh";
inline const std::string kDetectorBias = "scene.detector.b_s";
inline const std::string kAttnInit = "attn.init.w";
inline const std::string kAttnGru = "attn.gru";
inline const std::string kAttnScore = "attn.w_alpha";
inline const std::string kAttnHidden = "attn.w_alpha_h";
inline const std::string kAttnColumns = "attn.w_alpha_r";
inline const std::string kAttnBias = "attn.b_alpha";
inline const std::string kEmbedding = "dec.embed";
inline const std::string kDecoderGru = "dec.gru";
inline const std::string kMlpHidden = "dec.mlp.w_hidden";
inline const std::string kMlpHiddenBias = "dec.mlp.b_hidden";
inline const std::string kMlpOut = "dec.mlp.w_out";
inline const std::string kMlpOutBias = "dec.mlp.b_out";
inline const std::string kReconGru = "recon.gru";
}  // namespace names

/// Registers every model parameter under its group with the given initial values:
/// matrices and weight vectors uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);
/// Registers every model parameter with zero values.
ParamStore zero_params(const ModelConfig& config);

/// Checks that a store holds exactly the parameters of `config` with matching shapes.
void check_params(const ParamStore& params, const ModelConfig& config);

}  // namespace storyforge
