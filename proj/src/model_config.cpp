// SPDX-License-Identifier: Apache-2.0
#include "storyforge/model_config.hpp"

#include <cmath>
#include <random>

#include "storyforge/errors.hpp"
#include "storyforge/gru.hpp"

namespace storyforge {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model: ") + name + " must be positive");
  };
  positive(feature_dim, "feature_dim");
  positive(photo_hidden, "photo_hidden");
  positive(attn_hidden, "attn_hidden");
  positive(dec_hidden, "dec_hidden");
  positive(embed_dim, "embed_dim");
  positive(max_photos, "max_photos");
  positive(max_words, "max_words");
  positive(sentences, "sentences");
  if (vocab_size <= kSpecialCount) throw ConfigError("model: vocab_size must exceed the special tokens");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"feature_dim", c.feature_dim}, {"photo_hidden", c.photo_hidden},
                     {"attn_hidden", c.attn_hidden}, {"dec_hidden", c.dec_hidden},
                     {"embed_dim", c.embed_dim},     {"vocab_size", c.vocab_size},
                     {"max_photos", c.max_photos},   {"max_words", c.max_words},
                     {"sentences", c.sentences}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("feature_dim").get_to(c.feature_dim);
  j.at("photo_hidden").get_to(c.photo_hidden);
  j.at("attn_hidden").get_to(c.attn_hidden);
  j.at("dec_hidden").get_to(c.dec_hidden);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_photos").get_to(c.max_photos);
  j.at("max_words").get_to(c.max_words);
  j.at("sentences").get_to(c.sentences);
}

namespace {

struct Layout {
  std::string name;
  std::string group;
  Shape shape;
  bool bias;
};

void add_gru_layout(std::vector<Layout>& out, const std::string& prefix, const std::string& group,
                    std::size_t input, std::size_t hidden) {
  GruNames n(prefix);
  out.push_back({n.input_to_gates, group, {3 * hidden, input}, false});
  out.push_back({n.hidden_to_gates, group, {3 * hidden, hidden}, false});
  out.push_back({n.bias, group, {3 * hidden}, true});
}

std::vector<Layout> layout(const ModelConfig& c) {
  c.validate();
  const std::size_t dv = c.scene_dim(), v = c.vocab_size;
  std::vector<Layout> out;
  add_gru_layout(out, names::kPhotoForward, groups::kPhotoEncoder, c.feature_dim, c.photo_hidden);
  add_gru_layout(out, names::kPhotoBackward, groups::kPhotoEncoder, c.feature_dim, c.photo_hidden);
  out.push_back({names::kPhotoSkip, groups::kPhotoEncoder, {dv, c.feature_dim}, false});

  add_gru_layout(out, names::kSceneGru, groups::kSceneEncoder, dv, dv);
  out.push_back({names::kDetectorPhoto, groups::kSceneEncoder, {dv}, false});
  out.push_back({names::kDetectorHidden, groups::kSceneEncoder, {dv}, false});
  out.push_back({names::kDetectorBias, groups::kSceneEncoder, {1}, true});

  out.push_back({names::kAttnInit, groups::kAttention, {c.attn_hidden, dv}, false});
  add_gru_layout(out, names::kAttnGru, groups::kAttention, c.attention_length(), c.attn_hidden);
  out.push_back({names::kAttnScore, groups::kAttention, {c.attn_hidden}, false});
  out.push_back({names::kAttnHidden, groups::kAttention, {c.attn_hidden, c.attn_hidden}, false});
  out.push_back({names::kAttnColumns, groups::kAttention, {c.attn_hidden, dv}, false});
  out.push_back({names::kAttnBias, groups::kAttention, {c.attn_hidden}, true});

  out.push_back({names::kEmbedding, groups::kSentenceDecoder, {v, c.embed_dim}, false});
  add_gru_layout(out, names::kDecoderGru, groups::kSentenceDecoder, c.embed_dim + dv, c.dec_hidden);
  out.push_back({names::kMlpHidden, groups::kSentenceDecoder, {c.dec_hidden, c.dec_hidden + dv}, false});
  out.push_back({names::kMlpHiddenBias, groups::kSentenceDecoder, {c.dec_hidden}, true});
  out.push_back({names::kMlpOut, groups::kSentenceDecoder, {v, c.dec_hidden}, false});
  out.push_back({names::kMlpOutBias, groups::kSentenceDecoder, {v}, true});

  add_gru_layout(out, names::kReconGru, groups::kReconstructor, 2 * v, dv);
  return out;
}

}  // namespace

ParamStore zero_params(const ModelConfig& config) {
  ParamStore store;
  for (const auto& item : layout(config)) store.add(item.name, item.group, NumArray(item.shape));
  return store;
}

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& item : layout(config)) {
    NumArray value(item.shape);
    if (!item.bias) {
      const double fan_out = static_cast<double>(item.shape[0]);
      const double fan_in = item.shape.size() > 1 ? static_cast<double>(item.shape[1]) : 1.0;
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (auto& v : value.data()) v = dist(rng);
    }
    store.add(item.name, item.group, std::move(value));
  }
  return store;
}

void check_params(const ParamStore& params, const ModelConfig& config) {
  const auto expected = layout(config);
  if (expected.size() != params.entries().size())
    throw ConfigError("parameters do not match the model configuration (entry count)");
  for (const auto& item : expected) {
    if (!params.contains(item.name)) throw ConfigError("missing parameter '" + item.name + "'");
    if (params.at(item.name).shape() != item.shape)
      throw ConfigError("parameter '" + item.name + "' has shape " +
                        shape_string(params.at(item.name).shape()) + ", expected " +
                        shape_string(item.shape));
    if (params.group_of(item.name) != item.group)
      throw ConfigError("parameter '" + item.name + "' is in the wrong group");
  }
}

}  // namespace storyforge
