// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "storyforge/adam.hpp"
#include "storyforge/album.hpp"
#include "storyforge/decoder.hpp"
#include "storyforge/losses.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/model_config.hpp"
#include "storyforge/param_store.hpp"
#include "storyforge/vocabulary.hpp"

namespace storyforge {

enum class Stage { one, two, all };

std::string to_string(Stage stage);
/// Accepts "1", "2" and "all". Throws ConfigError otherwise.
Stage parse_stage(const std::string& text);

inline constexpr std::size_t kDefaultPatience = 30;

struct TrainConfig {
  ModelConfig model;
  Stage stage = Stage::all;
  double lr = 4e-4;
  double lambda = kDefaultLambda;
  double mu = kDefaultMu;
  std::size_t batch_size = 8;
  /// Optimizer steps per stage.
  std::size_t max_steps = 2000;
  /// Steps between validations; 0 validates once per epoch.
  std::size_t validate_every = 0;
  std::size_t patience = kDefaultPatience;
  std::uint64_t seed = 1;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);

struct TrainLogEntry {
  int stage = 1;
  std::size_t step = 0;
  LossReport loss;
  std::optional<double> cider;
};

/// One JSON object per line.
std::string format_log_entry(const TrainLogEntry& entry);
/// Header line; the only place a wall-clock timestamp appears.
std::string format_log_header(const nlohmann::json& config);

/// One training example: an album paired with one of its reference stories.
struct Example {
  const AlbumExample* album;
  std::size_t story;
};

std::vector<Example> make_examples(std::span<const AlbumExample> albums);

/// Sums the per-example losses of a batch and back-propagates them into the
/// store's grad slots (which are zeroed first). One derangement per example;
/// empty derangements disable the ranking term for that example.
LossReport accumulate_gradients(ParamStore& params, const ModelConfig& config, std::span<const Example> batch,
                                std::span<const std::vector<std::size_t>> derangements, const LossWeights& weights);

/// Summed losses over every example without touching gradients.
LossReport dataset_loss(const ParamStore& params, const ModelConfig& config, std::span<const AlbumExample> albums,
                        const LossWeights& weights, std::span<const std::vector<std::size_t>> derangements = {});

/// Flat candidate tokens of a generated story (EOS and later ids dropped).
std::vector<std::string> story_tokens(const StoryHypothesis& story, const Vocabulary& vocab);

/// Greedy generation for every album, scored against all its references.
std::vector<EvalPair> generate_pairs(const ParamStore& params, const ModelConfig& config,
                                     std::span<const AlbumExample> albums, const Vocabulary& vocab,
                                     const DecodeOptions& options = {});

/// Corpus CIDEr of greedy stories. Deterministic for fixed parameters.
double validate(const ParamStore& params, const ModelConfig& config, std::span<const AlbumExample> albums,
                const Vocabulary& vocab);

struct TrainHooks {
  /// Receives every log line (entries only; the header is the caller's).
  std::function<void(const std::string&)> log;
  /// Called with the selected parameters whenever they change ("best"), and
  /// with the last finite parameters before a DivergenceError ("diverged").
  std::function<void(const ParamStore&, const std::string& kind)> checkpoint;
};

struct StageResult {
  /// Best-validation parameters, or the final ones when nothing was validated.
  ParamStore params;
  ParamStore last;
  std::size_t steps = 0;
  std::size_t validations = 0;
  bool stopped_early = false;
  std::optional<double> best_cider;
  std::vector<TrainLogEntry> entries;
};

/// Encoder and decoder training with nll + λ·rank; the reconstructor is frozen
/// and not evaluated. Starts from init_params(config.model, config.seed) unless
/// `initial` is given. An empty validation set disables validation.
StageResult run_stage1(std::span<const AlbumExample> train, std::span<const AlbumExample> val,
                       const Vocabulary& vocab, const TrainConfig& config, const TrainHooks& hooks = {},
                       const ParamStore* initial = nullptr, std::size_t first_step = 1);

/// Joint training of the sentence decoder and reconstructor under the full loss
/// with photo_encoder, scene_encoder and attention frozen.
StageResult run_stage2(const ParamStore& checkpoint, std::span<const AlbumExample> train,
                       std::span<const AlbumExample> val, const Vocabulary& vocab, const TrainConfig& config,
                       const TrainHooks& hooks = {}, std::size_t first_step = 1);

/// Runs the stages selected by config.stage. For "all", stage 2 starts from the
/// parameters selected by stage 1 and its steps continue the numbering.
StageResult run_training(std::span<const AlbumExample> train, std::span<const AlbumExample> val,
                         const Vocabulary& vocab, const TrainConfig& config, const TrainHooks& hooks = {},
                         const ParamStore* initial = nullptr);

}  // namespace storyforge
