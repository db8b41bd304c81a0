// SPDX-License-Identifier: Apache-2.0
#include "storyforge/diagnostics.hpp"

#include <algorithm>
#include <random>
#include <utility>

#include "storyforge/decoder.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/photo_encoder.hpp"
#include "storyforge/reconstructor.hpp"
#include "storyforge/scene_encoder.hpp"

namespace storyforge {

ModelConfig PipelineCheckSpec::model() const {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.photo_hidden = photo_hidden;
  c.attn_hidden = attn_hidden;
  c.dec_hidden = dec_hidden;
  c.embed_dim = embed_dim;
  c.vocab_size = vocab_size;
  c.max_photos = photos_max;
  c.max_words = words_max;
  c.sentences = sentences;
  return c;
}

PipelineCase make_pipeline_case(const PipelineCheckSpec& spec, std::uint64_t seed) {
  if (spec.photos_min == 0 || spec.photos_min > spec.photos_max) throw ConfigError("grad-check: bad photo range");
  if (spec.sentences < 2) throw ConfigError("grad-check: need at least two sentences");
  PipelineCase out{spec.model(), {}, {}, {}, {}};
  out.params = init_params(out.config, seed);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto photos = std::uniform_int_distribution<std::size_t>(spec.photos_min, spec.photos_max)(rng);
  out.album.album_id = "check-" + std::to_string(seed);
  for (std::size_t i = 0; i < photos; ++i) {
    NumArray f(Shape{spec.feature_dim});
    for (auto& v : f.data()) v = gauss(rng);
    out.album.features.push_back(std::move(f));
  }
  std::uniform_int_distribution<TokenId> word(static_cast<TokenId>(kSpecialCount),
                                              static_cast<TokenId>(spec.vocab_size - 1));
  std::uniform_int_distribution<std::size_t> length(1, spec.words_max);
  Story story;
  for (std::size_t j = 0; j < spec.sentences; ++j) {
    Sentence s;
    for (std::size_t t = length(rng); t > 0; --t) s.push_back(word(rng));
    s.push_back(kEos);
    story.push_back(std::move(s));
  }
  out.album.stories.push_back(std::move(story));
  out.derangement = sample_derangement(spec.sentences, rng);

  const PhotoEncoding enc = encode_photos(out.params, out.album.features);
  out.flags = encode_scenes(out.params, enc.columns).flags;
  return out;
}

namespace {

// Values at the base point that a reconstructor-only perturbation cannot change.
struct BaseForward {
  double nll = 0.0;
  double rank = 0.0;
  std::vector<NumArray> z;
  std::vector<std::vector<NumArray>> logits;
};

bool only_reconstructor_differs(const ParamStore& params, const ParamStore& base) {
  for (const auto& [name, entry] : params.entries()) {
    if (params.group_of(name) == groups::kReconstructor) continue;
    const auto a = entry.data(), b = base.at(name).data();
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

}  // namespace

GradCheckReport pipeline_grad_check(const PipelineCheckSpec& spec, std::uint64_t seed) {
  PipelineCase c = make_pipeline_case(spec, seed);
  const LossWeights weights{spec.lambda, spec.mu, true};
  const BoundaryDecision decide = forced_decision(c.flags);
  const Story& reference = c.album.stories.front();
  const auto graph = [&](const Binder& bind) {
    return story_loss(bind, c.config, c.album, reference, c.derangement, weights, decide).total;
  };

  const ParamStore base = c.params;
  BaseForward cached;
  {
    Tape tape;
    Binder bind(tape, base);
    const AlbumSummary summary = summarize_album(bind, c.config, c.album.features, decide);
    const StoryLoss loss = story_loss(bind, c.config, c.album, reference, c.derangement, weights, decide);
    cached.nll = loss.nll.scalar();
    cached.rank = loss.rank.scalar();
    for (std::size_t j = 0; j < reference.size(); ++j) {
      cached.z.push_back(summary.z[j].array());
      std::vector<NumArray> logits;
      for (const Var& d : sentence_log_prob(bind, summary.z[j], reference[j]).logits) logits.push_back(d.array());
      cached.logits.push_back(std::move(logits));
    }
  }

  // Perturbing a reconstructor weight leaves nll, rank, z and the logits as they
  // were, so only the reconstruction term is recomputed. The arithmetic matches
  // the full graph operation for operation, so the value is bit-identical.
  const ValueFn value = [&](ParamStore& p) {
    Tape tape;
    Binder bind(tape, std::as_const(p));
    if (!only_reconstructor_differs(p, base)) return graph(bind).scalar();
    std::vector<Var> z, rebuilt;
    for (std::size_t j = 0; j < cached.z.size(); ++j) {
      z.push_back(tape.constant(cached.z[j]));
      std::vector<Var> logits;
      for (const auto& d : cached.logits[j]) logits.push_back(tape.constant(d));
      rebuilt.push_back(reconstruct(bind, logits));
    }
    return total_loss(tape.scalar(cached.nll), tape.scalar(cached.rank), recon_loss(tape, z, rebuilt),
                      weights.lambda, weights.mu)
        .scalar();
  };
  const GradientFn gradient = [&](ParamStore& p) { evaluate_with_gradient(graph, p); };
  return grad_check(value, gradient, c.params, spec.delta);
}

}  // namespace storyforge
