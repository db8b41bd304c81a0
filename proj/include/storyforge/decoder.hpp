// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "storyforge/math.hpp"
#include "storyforge/model_config.hpp"
#include "storyforge/num_array.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/photo_encoder.hpp"
#include "storyforge/scene_encoder.hpp"
#include "storyforge/tape.hpp"
#include "storyforge/vocabulary.hpp"

namespace storyforge {

// ---- attention over R = [V, X] ---------------------------------------------

/// Columns of R padded to a fixed length, with the column projections that do
/// not depend on the attention step computed once.
struct AttentionContext {
  std::vector<Var> columns;  ///< invalid Var at masked positions
  Mask mask;
  std::vector<std::size_t> valid;
  std::vector<Var> projected;  ///< W_αr r_l + b_α for each valid position
};

/// Position of photo i is i. Scene slot s < m sits at max_photos + s and the
/// final slot (s = m) at 2 * max_photos, so the padded length is 2 * max_photos + 1.
std::size_t scene_slot_position(std::size_t slot, std::size_t photo_count, std::size_t max_photos);

AttentionContext attention_context(const Binder& bind, std::span<const Var> columns, Mask mask);
AttentionContext attention_context(const Binder& bind, std::span<const Var> photos,
                                   const SceneGraph& scenes, std::size_t max_photos);

struct AttentionState {
  Var hidden;
  Var alpha_prev;  ///< all zeros before the first step
  std::size_t step = 0;
};

/// hidden starts from a linear map of [forward_final; backward_final].
AttentionState initial_attention_state(const Binder& bind, const PhotoEncodingGraph& photos,
                                       std::size_t attention_length);

struct AttentionStep {
  Var z;
  Var alpha;
  AttentionState state;
};

/// h_j = GRU(α^{j−1}, h_{j−1}); α̃ = w_α · tanh(W_αh h_j + W_αr r_l + b_α) per column;
/// α = masked softmax(α̃); z = Σ α_l r_l.
AttentionStep attend(const Binder& bind, const AttentionContext& context, const AttentionState& state);

struct AttendResult {
  NumArray z;
  NumArray alpha;
  NumArray hidden;
};

/// Plain-array form: `columns` is [L x D_v] (row l is r_l), `mask` has length L
/// which must equal the attention GRU input size. Throws InvalidMaskError when
/// no column is valid.
AttendResult attend(const ParamStore& params, const NumArray& columns, const Mask& mask,
                    const NumArray& hidden, const NumArray& alpha_prev);

// ---- sentence decoder --------------------------------------------------------

struct DecoderStep {
  Var hidden;
  Var logits;
};

/// h_t = GRU([E(previous), z], h_{t−1}); logits = W_out tanh(W_hidden [h_t, z] + b) + b_out.
DecoderStep decoder_step(const Binder& bind, Var z, Var hidden, TokenId previous);

struct SentenceScore {
  Var log_prob;
  std::vector<Var> word_log_probs;
  std::vector<Var> logits;
};

/// Teacher-forced log P(reference | z). Step t consumes the previous reference
/// token (BOS first) and scores reference[t]; every id of `reference` is scored,
/// including its EOS. Throws DimensionError for ids outside the vocabulary.
SentenceScore sentence_log_prob(const Binder& bind, Var z, std::span<const TokenId> reference);

// ---- whole-album summary and generation -------------------------------------

struct AlbumSummary {
  PhotoEncodingGraph photos;
  SceneGraph scenes;
  AttentionContext context;
  std::vector<Var> z;
  std::vector<Var> alphas;
};

/// Photo encoder, scene encoder, then `config.sentences` attention steps.
AlbumSummary summarize_album(const Binder& bind, const ModelConfig& config,
                             std::span<const NumArray> features,
                             const BoundaryDecision& decide = straight_through_decision());

struct DecodeOptions {
  /// 1 selects greedy decoding.
  std::size_t beam_width = 1;
};

struct GeneratedSentence {
  /// Generated ids; ends with EOS unless max_words + 1 tokens were produced first.
  std::vector<TokenId> tokens;
  std::vector<double> word_log_probs;
  double log_prob = 0.0;
};

struct StoryHypothesis {
  std::vector<GeneratedSentence> sentences;
  /// Attention weights per sentence over the padded layout.
  std::vector<NumArray> alphas;
  Mask mask;
  std::vector<std::uint8_t> flags;
  std::vector<double> soft;
  std::size_t photo_count = 0;
  std::size_t scene_count = 0;
};

GeneratedSentence decode_sentence(const Binder& bind, Var z, std::size_t max_words,
                                  const DecodeOptions& options = {});

/// Deterministic for fixed parameters and inputs.
StoryHypothesis generate_story(const ParamStore& params, const ModelConfig& config,
                               std::span<const NumArray> features, const DecodeOptions& options = {});

}  // namespace storyforge
