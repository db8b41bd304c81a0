// SPDX-License-Identifier: Apache-2.0
#include "storyforge/losses.hpp"

#include <algorithm>
#include <numeric>

#include "storyforge/decoder.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/reconstructor.hpp"

namespace storyforge {

LossReport& LossReport::operator+=(const LossReport& other) {
  nll += other.nll;
  rank += other.rank;
  recon += other.recon;
  total += other.total;
  word_count += other.word_count;
  return *this;
}

Var nll_loss(Tape& tape, std::span<const Var> word_log_probs, std::span<const std::uint8_t> mask) {
  if (word_log_probs.size() != mask.size()) throw DimensionError("nll_loss: log-probs and mask differ in length");
  std::vector<Var> kept;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) kept.push_back(word_log_probs[i]);
  if (kept.empty()) return tape.scalar(0.0);
  return ops::affine(ops::sum(kept), -1.0, 0.0);
}

Var rank_loss(Tape& tape, std::span<const Var> positive, std::span<const Var> negative, double margin) {
  if (positive.size() != negative.size()) throw DimensionError("rank_loss: positive and negative counts differ");
  if (positive.empty()) return tape.scalar(0.0);
  std::vector<Var> terms;
  for (std::size_t j = 0; j < positive.size(); ++j)
    terms.push_back(ops::hinge(ops::affine(ops::sub(negative[j], positive[j]), 1.0, margin)));
  return ops::sum(terms);
}

Var recon_loss(Tape& tape, std::span<const Var> z, std::span<const Var> z_tilde) {
  if (z.size() != z_tilde.size()) throw DimensionError("recon_loss: z and z_tilde counts differ");
  if (z.empty()) return tape.scalar(0.0);
  std::vector<Var> terms;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j].size() != z_tilde[j].size())
      throw DimensionError("recon_loss: z_" + std::to_string(j) + " and its reconstruction differ in size");
    terms.push_back(ops::squared_distance(z_tilde[j], z[j]));
  }
  return ops::sum(terms);
}

Var total_loss(Var nll, Var rank, Var recon, double lambda, double mu) {
  if (lambda < 0 || mu < 0) throw ConfigError("total_loss: lambda and mu must be >= 0");
  const Var parts[] = {nll, ops::affine(rank, lambda, 0.0), ops::affine(recon, mu, 0.0)};
  return ops::sum(parts);
}

double total_loss(const LossReport& report, double lambda, double mu) {
  if (lambda < 0 || mu < 0) throw ConfigError("total_loss: lambda and mu must be >= 0");
  return report.nll + lambda * report.rank + mu * report.recon;
}

std::vector<std::size_t> sample_derangement(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) return {};
  std::vector<std::size_t> perm(n);
  do {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[std::uniform_int_distribution<std::size_t>(0, i)(rng)]);
  } while (!is_derangement(perm));
  return perm;
}

bool is_derangement(std::span<const std::size_t> perm) {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] == i) return false;
  return !perm.empty();
}

StoryLoss story_loss(const Binder& bind, const ModelConfig& config, const AlbumExample& album,
                     const Story& reference, std::span<const std::size_t> derangement,
                     const LossWeights& weights, const BoundaryDecision& decide) {
  if (reference.size() != config.sentences)
    throw DimensionError("story_loss: reference has " + std::to_string(reference.size()) + " sentences, expected " +
                         std::to_string(config.sentences));
  if (!derangement.empty() && derangement.size() != reference.size())
    throw DimensionError("story_loss: derangement length differs from the sentence count");
  Tape& tape = bind.tape();
  AlbumSummary summary = summarize_album(bind, config, album.features, decide);

  StoryLoss out;
  std::vector<Var> words;
  std::vector<std::vector<Var>> logits;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    SentenceScore score = sentence_log_prob(bind, summary.z[j], reference[j]);
    words.insert(words.end(), score.word_log_probs.begin(), score.word_log_probs.end());
    out.positive.push_back(score.log_prob);
    logits.push_back(std::move(score.logits));
  }
  const std::vector<std::uint8_t> mask(words.size(), 1);
  out.nll = nll_loss(tape, words, mask);
  out.report.word_count = words.size();

  if (!derangement.empty() && weights.lambda > 0) {
    for (std::size_t j = 0; j < reference.size(); ++j)
      out.negative.push_back(sentence_log_prob(bind, summary.z[j], reference[derangement[j]]).log_prob);
    out.rank = rank_loss(tape, out.positive, out.negative);
  } else {
    out.rank = tape.scalar(0.0);
  }

  if (weights.reconstruct) {
    std::vector<Var> rebuilt;
    for (const auto& sentence_logits : logits) rebuilt.push_back(reconstruct(bind, sentence_logits));
    out.recon = recon_loss(tape, summary.z, rebuilt);
  } else {
    out.recon = tape.scalar(0.0);
  }

  out.total = total_loss(out.nll, out.rank, out.recon, weights.lambda, weights.mu);
  out.report.nll = out.nll.scalar();
  out.report.rank = out.rank.scalar();
  out.report.recon = out.recon.scalar();
  out.report.total = out.total.scalar();
  return out;
}

}  // namespace storyforge
