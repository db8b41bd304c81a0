// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "storyforge/album.hpp"
#include "storyforge/model_config.hpp"
#include "storyforge/scene_encoder.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

inline constexpr double kDefaultLambda = 0.2;
inline constexpr double kDefaultMu = 0.8;
inline constexpr double kRankMargin = 1.0;

struct LossReport {
  double nll = 0.0;
  double rank = 0.0;
  double recon = 0.0;
  double total = 0.0;
  std::size_t word_count = 0;

  LossReport& operator+=(const LossReport& other);
  double per_word_nll() const { return word_count ? nll / static_cast<double>(word_count) : 0.0; }
};

/// Σ −log P over positions with mask = 1; masked positions contribute nothing.
Var nll_loss(Tape& tape, std::span<const Var> word_log_probs, std::span<const std::uint8_t> mask);
/// Σ_j max(0, margin − log P(S_j) + log P(S'_j)): true sentences must beat the
/// shuffled ones by at least `margin` nats.
Var rank_loss(Tape& tape, std::span<const Var> positive, std::span<const Var> negative,
              double margin = kRankMargin);
/// Σ_j ‖z̃_j − z_j‖².
Var recon_loss(Tape& tape, std::span<const Var> z, std::span<const Var> z_tilde);
/// nll + λ·rank + µ·recon.
Var total_loss(Var nll, Var rank, Var recon, double lambda, double mu);
double total_loss(const LossReport& report, double lambda, double mu);

/// Uniformly random permutation without fixed points. Empty for n < 2.
std::vector<std::size_t> sample_derangement(std::size_t n, std::mt19937_64& rng);
bool is_derangement(std::span<const std::size_t> perm);

struct LossWeights {
  double lambda = kDefaultLambda;
  double mu = kDefaultMu;
  /// When false the reconstructor is not evaluated and recon is 0.
  bool reconstruct = true;
};

struct StoryLoss {
  Var nll;
  Var rank;
  Var recon;
  Var total;
  LossReport report;
  std::vector<Var> positive;
  std::vector<Var> negative;
};

/// Full objective for one album and one reference story. Sentence j is scored
/// against z_j; its negative is sentence derangement[j] scored against the same
/// z_j. An empty derangement disables the ranking term.
StoryLoss story_loss(const Binder& bind, const ModelConfig& config, const AlbumExample& album,
                     const Story& reference, std::span<const std::size_t> derangement,
                     const LossWeights& weights,
                     const BoundaryDecision& decide = straight_through_decision());

}  // namespace storyforge
