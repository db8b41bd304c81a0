// SPDX-License-Identifier: Apache-2.0
#include "storyforge/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "storyforge/errors.hpp"
#include "storyforge/gru.hpp"

namespace storyforge {

std::size_t scene_slot_position(std::size_t slot, std::size_t photo_count, std::size_t max_photos) {
  if (photo_count > max_photos) throw DimensionError("album has more photos than max_photos");
  if (slot > photo_count) throw DimensionError("scene slot out of range");
  return slot == photo_count ? 2 * max_photos : max_photos + slot;
}

AttentionContext attention_context(const Binder& bind, std::span<const Var> columns, Mask mask) {
  if (columns.size() != mask.size())
    throw DimensionError("attention: " + std::to_string(columns.size()) + " columns but mask length " +
                         std::to_string(mask.size()));
  AttentionContext ctx;
  ctx.columns.assign(columns.begin(), columns.end());
  ctx.mask = std::move(mask);
  const Var w_cols = bind(names::kAttnColumns);
  const Var bias = bind(names::kAttnBias);
  for (std::size_t l = 0; l < ctx.mask.size(); ++l) {
    if (!ctx.mask[l]) continue;
    if (!ctx.columns[l].valid()) throw DimensionError("attention: valid position " + std::to_string(l) + " has no column");
    ctx.valid.push_back(l);
    ctx.projected.push_back(ops::add(ops::matvec(w_cols, ctx.columns[l]), bias));
  }
  if (ctx.valid.empty()) throw InvalidMaskError("attention: no valid column");
  return ctx;
}

AttentionContext attention_context(const Binder& bind, std::span<const Var> photos,
                                   const SceneGraph& scenes, std::size_t max_photos) {
  const std::size_t m = photos.size();
  if (scenes.slots.size() != m + 1) throw DimensionError("attention: scene slots do not match photo count");
  const std::size_t length = 2 * max_photos + 1;
  std::vector<Var> columns(length);
  Mask mask(length, 0);
  for (std::size_t i = 0; i < m; ++i) {
    columns[i] = photos[i];
    mask[i] = 1;
  }
  for (std::size_t s = 0; s <= m; ++s) {
    const std::size_t pos = scene_slot_position(s, m, max_photos);
    columns[pos] = scenes.slots[s];
    mask[pos] = scenes.scene_mask[s];
  }
  return attention_context(bind, columns, std::move(mask));
}

AttentionState initial_attention_state(const Binder& bind, const PhotoEncodingGraph& photos,
                                       std::size_t attention_length) {
  Var both = ops::concat(photos.forward_final, photos.backward_final);
  return AttentionState{ops::matvec(bind(names::kAttnInit), both), bind.tape().zeros(attention_length), 0};
}

AttentionStep attend(const Binder& bind, const AttentionContext& context, const AttentionState& state) {
  const GruVars gru = bind_gru(bind, names::kAttnGru);
  const Var w_score = bind(names::kAttnScore);
  const Var w_hidden = bind(names::kAttnHidden);

  AttentionStep out;
  out.state.hidden = ops::gru_cell(state.alpha_prev, state.hidden, gru);
  const Var query = ops::matvec(w_hidden, out.state.hidden);
  std::vector<Var> scores;
  scores.reserve(context.valid.size());
  for (const Var& proj : context.projected)
    scores.push_back(ops::dot(w_score, ops::tanh(ops::add(query, proj))));
  const Var logits = ops::scatter(scores, context.valid, context.mask.size());
  out.alpha = ops::masked_softmax(logits, context.mask);
  out.z = ops::weighted_columns(context.columns, out.alpha, context.mask);
  out.state.alpha_prev = out.alpha;
  out.state.step = state.step + 1;
  return out;
}

AttendResult attend(const ParamStore& params, const NumArray& columns, const Mask& mask,
                    const NumArray& hidden, const NumArray& alpha_prev) {
  if (columns.rank() != 2) throw DimensionError("attend: columns must be a matrix");
  Tape tape;
  Binder bind(tape, params);
  std::vector<Var> cols(columns.rows());
  const std::size_t dv = columns.cols();
  for (std::size_t l = 0; l < columns.rows(); ++l) {
    if (l < mask.size() && !mask[l]) continue;
    std::vector<double> row(columns.data().begin() + l * dv, columns.data().begin() + (l + 1) * dv);
    cols[l] = tape.constant(std::move(row));
  }
  AttentionContext ctx = attention_context(bind, cols, mask);
  AttentionStep step = attend(bind, ctx, AttentionState{tape.constant(hidden), tape.constant(alpha_prev), 0});
  return AttendResult{step.z.array(), step.alpha.array(), step.state.hidden.array()};
}

namespace {

struct DecoderVars {
  Var embedding;
  GruVars gru;
  Var w_hidden, b_hidden, w_out, b_out;
};

DecoderVars bind_decoder(const Binder& bind) {
  return DecoderVars{bind(names::kEmbedding), bind_gru(bind, names::kDecoderGru), bind(names::kMlpHidden),
                     bind(names::kMlpHiddenBias),  bind(names::kMlpOut),            bind(names::kMlpOutBias)};
}

DecoderStep step_with(const DecoderVars& w, Var z, Var hidden, TokenId previous) {
  if (previous < 0 || static_cast<std::size_t>(previous) >= w.embedding.array().rows())
    throw DimensionError("decoder: token id " + std::to_string(previous) + " out of range");
  DecoderStep out;
  const Var input = ops::concat(ops::row(w.embedding, static_cast<std::size_t>(previous)), z);
  out.hidden = ops::gru_cell(input, hidden, w.gru);
  const Var mlp_in = ops::concat(out.hidden, z);
  const Var mid = ops::tanh(ops::add(ops::matvec(w.w_hidden, mlp_in), w.b_hidden));
  out.logits = ops::add(ops::matvec(w.w_out, mid), w.b_out);
  return out;
}

}  // namespace

DecoderStep decoder_step(const Binder& bind, Var z, Var hidden, TokenId previous) {
  return step_with(bind_decoder(bind), z, hidden, previous);
}

namespace {

Var initial_decoder_hidden(const Binder& bind) {
  const std::size_t hidden = bind.store().at(GruNames(names::kDecoderGru).hidden_to_gates).cols();
  return bind.tape().zeros(hidden);
}

}  // namespace

SentenceScore sentence_log_prob(const Binder& bind, Var z, std::span<const TokenId> reference) {
  if (reference.empty()) throw DimensionError("sentence_log_prob: empty reference");
  const std::size_t vocab = bind.store().at(names::kMlpOutBias).size();
  for (TokenId id : reference)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw DimensionError("sentence_log_prob: token id " + std::to_string(id) + " out of range for vocabulary of " +
                           std::to_string(vocab));
  SentenceScore out;
  Var hidden = initial_decoder_hidden(bind);
  const DecoderVars weights = bind_decoder(bind);
  TokenId previous = kBos;
  for (TokenId target : reference) {
    DecoderStep step = step_with(weights, z, hidden, previous);
    hidden = step.hidden;
    out.logits.push_back(step.logits);
    out.word_log_probs.push_back(ops::log_softmax_at(step.logits, static_cast<std::size_t>(target)));
    previous = target;
  }
  out.log_prob = ops::sum(out.word_log_probs);
  return out;
}

AlbumSummary summarize_album(const Binder& bind, const ModelConfig& config, std::span<const NumArray> features,
                             const BoundaryDecision& decide) {
  if (features.size() > config.max_photos)
    throw DimensionError("album has " + std::to_string(features.size()) + " photos, max_photos is " +
                         std::to_string(config.max_photos));
  AlbumSummary out;
  out.photos = encode_photos(bind, features);
  out.scenes = encode_scenes(bind, out.photos.columns, decide);
  out.context = attention_context(bind, out.photos.columns, out.scenes, config.max_photos);
  AttentionState state = initial_attention_state(bind, out.photos, config.attention_length());
  for (std::size_t j = 0; j < config.sentences; ++j) {
    AttentionStep step = attend(bind, out.context, state);
    out.z.push_back(step.z);
    out.alphas.push_back(step.alpha);
    state = step.state;
  }
  return out;
}

namespace {

struct Beam {
  std::vector<TokenId> tokens;
  std::vector<double> word_log_probs;
  double score = 0.0;
  Var hidden;
  bool finished = false;
};

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - top - log_total;
  return out;
}

GeneratedSentence finish(const Beam& beam) {
  return GeneratedSentence{beam.tokens, beam.word_log_probs, beam.score};
}

GeneratedSentence greedy(const Binder& bind, Var z, std::size_t max_words) {
  Beam beam;
  beam.hidden = initial_decoder_hidden(bind);
  const DecoderVars weights = bind_decoder(bind);
  TokenId previous = kBos;
  while (beam.tokens.size() < max_words + 1) {
    DecoderStep step = step_with(weights, z, beam.hidden, previous);
    beam.hidden = step.hidden;
    const auto lp = log_softmax(step.logits.value());
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    beam.tokens.push_back(best);
    beam.word_log_probs.push_back(lp[static_cast<std::size_t>(best)]);
    beam.score += lp[static_cast<std::size_t>(best)];
    previous = best;
    if (best == kEos) break;
  }
  return finish(beam);
}

GeneratedSentence beam_search(const Binder& bind, Var z, std::size_t max_words, std::size_t width) {
  struct Candidate {
    double score;
    double step;  // log-prob of the appended token; breaks ties in rounded totals
    std::size_t beam;
    TokenId token;  // -1 keeps a finished beam as is
  };
  std::vector<Beam> beams(1);
  beams[0].hidden = initial_decoder_hidden(bind);
  const DecoderVars weights = bind_decoder(bind);
  while (true) {
    std::vector<Candidate> pool;
    std::vector<std::vector<double>> step_lp(beams.size());
    std::vector<Var> step_hidden(beams.size());
    for (std::size_t b = 0; b < beams.size(); ++b) {
      if (beams[b].finished) {
        pool.push_back({beams[b].score, 0.0, b, -1});
        continue;
      }
      const TokenId previous = beams[b].tokens.empty() ? kBos : beams[b].tokens.back();
      DecoderStep step = step_with(weights, z, beams[b].hidden, previous);
      step_hidden[b] = step.hidden;
      step_lp[b] = log_softmax(step.logits.value());
      for (std::size_t t = 0; t < step_lp[b].size(); ++t)
        pool.push_back({beams[b].score + step_lp[b][t], step_lp[b][t], b, static_cast<TokenId>(t)});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.step != b.step) return a.step > b.step;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    });
    if (pool.size() > width) pool.resize(width);

    std::vector<Beam> next;
    bool all_finished = true;
    for (const Candidate& c : pool) {
      Beam beam = beams[c.beam];
      if (c.token >= 0) {
        beam.tokens.push_back(c.token);
        beam.word_log_probs.push_back(step_lp[c.beam][static_cast<std::size_t>(c.token)]);
        beam.score = c.score;
        beam.hidden = step_hidden[c.beam];
        beam.finished = c.token == kEos || beam.tokens.size() >= max_words + 1;
      }
      all_finished = all_finished && beam.finished;
      next.push_back(std::move(beam));
    }
    beams = std::move(next);
    if (all_finished) break;
  }
  return finish(beams.front());
}

}  // namespace

GeneratedSentence decode_sentence(const Binder& bind, Var z, std::size_t max_words, const DecodeOptions& options) {
  if (options.beam_width == 0) throw ConfigError("decode: beam width must be >= 1");
  if (options.beam_width == 1) return greedy(bind, z, max_words);
  return beam_search(bind, z, max_words, options.beam_width);
}

StoryHypothesis generate_story(const ParamStore& params, const ModelConfig& config,
                               std::span<const NumArray> features, const DecodeOptions& options) {
  Tape tape;
  Binder bind(tape, params);
  AlbumSummary summary = summarize_album(bind, config, features);
  StoryHypothesis out;
  out.flags = summary.scenes.flags;
  out.soft = summary.scenes.soft;
  out.mask = summary.context.mask;
  out.photo_count = features.size();
  out.scene_count = summary.scenes.scene_count;
  for (std::size_t j = 0; j < summary.z.size(); ++j) {
    out.sentences.push_back(decode_sentence(bind, summary.z[j], config.max_words, options));
    out.alphas.push_back(summary.alphas[j].array());
  }
  return out;
}

}  // namespace storyforge
