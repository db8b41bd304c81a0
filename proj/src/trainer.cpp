// SPDX-License-Identifier: Apache-2.0
#include "storyforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <future>
#include <thread>

#include "storyforge/errors.hpp"

namespace storyforge {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::one: return "1";
    case Stage::two: return "2";
    case Stage::all: return "all";
  }
  return "all";
}

Stage parse_stage(const std::string& text) {
  if (text == "1") return Stage::one;
  if (text == "2") return Stage::two;
  if (text == "all") return Stage::all;
  throw ConfigError("stage must be 1, 2 or all (got '" + text + "')");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(mu >= 0) || !std::isfinite(mu)) throw ConfigError("mu must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (patience == 0) throw ConfigError("patience must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"stage", to_string(c.stage)},
                     {"lr", c.lr},
                     {"lambda", c.lambda},
                     {"mu", c.mu},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"validate_every", c.validate_every},
                     {"patience", c.patience},
                     {"seed", c.seed}};
}

std::string format_log_entry(const TrainLogEntry& e) {
  nlohmann::ordered_json j;
  j["stage"] = e.stage;
  j["step"] = e.step;
  j["nll"] = e.loss.nll;
  j["rank"] = e.loss.rank;
  j["recon"] = e.loss.recon;
  j["total"] = e.loss.total;
  j["word_count"] = e.loss.word_count;
  if (e.cider) j["cider"] = *e.cider;
  return j.dump();
}

std::string format_log_header(const nlohmann::json& config) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  nlohmann::ordered_json j;
  j["log"] = "storyforge-train";
  j["started"] = stamp;
  j["config"] = config;
  return j.dump();
}

std::vector<Example> make_examples(std::span<const AlbumExample> albums) {
  std::vector<Example> out;
  for (const auto& album : albums)
    for (std::size_t s = 0; s < album.stories.size(); ++s) out.push_back({&album, s});
  return out;
}

LossReport accumulate_gradients(ParamStore& params, const ModelConfig& config, std::span<const Example> batch,
                                std::span<const std::vector<std::size_t>> derangements, const LossWeights& weights) {
  if (derangements.size() != batch.size()) throw DimensionError("accumulate_gradients: one derangement per example");
  params.zero_grad();
  LossReport total;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Tape tape;
    Binder bind(tape, params);
    const Example& ex = batch[b];
    StoryLoss loss = story_loss(bind, config, *ex.album, ex.album->stories[ex.story], derangements[b], weights);
    if (!std::isfinite(loss.report.total))
      throw DivergenceError("non-finite loss on album '" + ex.album->album_id + "'");
    tape.backward(loss.total);
    total += loss.report;
  }
  return total;
}

LossReport dataset_loss(const ParamStore& params, const ModelConfig& config, std::span<const AlbumExample> albums,
                        const LossWeights& weights, std::span<const std::vector<std::size_t>> derangements) {
  const auto examples = make_examples(albums);
  if (!derangements.empty() && derangements.size() != examples.size())
    throw DimensionError("dataset_loss: one derangement per example");
  LossReport total;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Tape tape;
    Binder bind(tape, params);
    const auto& ex = examples[i];
    const std::span<const std::size_t> perm =
        derangements.empty() ? std::span<const std::size_t>{} : std::span<const std::size_t>(derangements[i]);
    total += story_loss(bind, config, *ex.album, ex.album->stories[ex.story], perm, weights).report;
  }
  return total;
}

std::vector<std::string> story_tokens(const StoryHypothesis& story, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& sentence : story.sentences) {
    const auto words = decode_sentence(sentence.tokens, vocab);
    out.insert(out.end(), words.begin(), words.end());
  }
  return out;
}

std::vector<EvalPair> generate_pairs(const ParamStore& params, const ModelConfig& config,
                                     std::span<const AlbumExample> albums, const Vocabulary& vocab,
                                     const DecodeOptions& options) {
  std::vector<EvalPair> pairs(albums.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto story = generate_story(params, config, albums[i].features, options);
      pairs[i].candidate = story_tokens(story, vocab);
      pairs[i].references = flat_references(albums[i]);
    }
  };
  // Read-only fan-out; every album writes only its own slot.
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  const std::size_t chunk = (albums.size() + threads - 1) / std::max<std::size_t>(threads, 1);
  if (threads == 1 || albums.size() < 2 * threads) {
    work(0, albums.size());
    return pairs;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t begin = 0; begin < albums.size(); begin += chunk)
    jobs.push_back(std::async(std::launch::async, work, begin, std::min(albums.size(), begin + chunk)));
  for (auto& job : jobs) job.get();
  return pairs;
}

double validate(const ParamStore& params, const ModelConfig& config, std::span<const AlbumExample> albums,
                const Vocabulary& vocab) {
  if (albums.empty()) throw EvaluationError("validate: empty validation set");
  const auto pairs = generate_pairs(params, config, albums, vocab);
  return cider(pairs);
}

namespace {

std::mt19937_64 stage_rng(std::uint64_t seed, int stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage)};
  return std::mt19937_64(seq);
}

StageResult run_stage(int stage, ParamStore params, std::span<const AlbumExample> train,
                      std::span<const AlbumExample> val, const Vocabulary& vocab, const TrainConfig& config,
                      const TrainHooks& hooks, std::size_t first_step, const LossWeights& weights) {
  config.validate();
  check_params(params, config.model);
  const auto examples = make_examples(train);
  if (examples.empty() && config.max_steps > 0) throw Error("training set is empty");

  std::mt19937_64 rng = stage_rng(config.seed, stage);
  Adam adam(AdamConfig{config.lr});
  const std::size_t batch = std::min(config.batch_size, std::max<std::size_t>(examples.size(), 1));
  const std::size_t steps_per_epoch = (examples.size() + batch - 1) / batch;
  const std::size_t every = config.validate_every ? config.validate_every : std::max<std::size_t>(steps_per_epoch, 1);

  StageResult result;
  result.params = params;
  std::size_t stale = 0;
  std::vector<std::size_t> order;
  std::vector<std::vector<std::size_t>> perms;
  std::size_t cursor = 0;

  for (std::size_t s = 0; s < config.max_steps; ++s) {
    if (cursor == 0) {
      order.resize(examples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      perms.assign(examples.size(), {});
      for (std::size_t i = 0; i < examples.size(); ++i)
        perms[i] = weights.lambda > 0 ? sample_derangement(examples[i].album->stories[examples[i].story].size(), rng)
                                      : std::vector<std::size_t>{};
    }
    const std::size_t end = std::min(cursor + batch, order.size());
    std::vector<Example> chunk;
    std::vector<std::vector<std::size_t>> chunk_perms;
    for (std::size_t i = cursor; i < end; ++i) {
      chunk.push_back(examples[order[i]]);
      chunk_perms.push_back(perms[order[i]]);
    }
    cursor = end == order.size() ? 0 : end;

    TrainLogEntry entry;
    entry.stage = stage;
    entry.step = first_step + s;
    try {
      entry.loss = accumulate_gradients(params, config.model, chunk, chunk_perms, weights);
      adam.step(params);
    } catch (const DivergenceError&) {
      if (hooks.checkpoint) hooks.checkpoint(params, "diverged");
      throw;
    } catch (const NonFiniteGradientError& e) {
      if (hooks.checkpoint) hooks.checkpoint(params, "diverged");
      throw DivergenceError(e.what());
    }
    ++result.steps;

    if (!val.empty() && (s + 1) % every == 0) {
      const double score = validate(params, config.model, val, vocab);
      entry.cider = score;
      ++result.validations;
      const bool improved = !result.best_cider || score > *result.best_cider;
      if (!result.best_cider || score >= *result.best_cider) {
        result.best_cider = score;
        result.params = params;
        if (hooks.checkpoint) hooks.checkpoint(result.params, "best");
      }
      stale = improved ? 0 : stale + 1;
    }
    if (hooks.log) hooks.log(format_log_entry(entry));
    result.entries.push_back(entry);
    if (stale >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }

  params.zero_grad();
  for (auto& [name, value] : params.entries()) value.drop_grad();
  result.last = params;
  if (!result.best_cider) {
    result.params = params;
    if (hooks.checkpoint) hooks.checkpoint(result.params, "best");
  } else {
    for (auto& [name, value] : result.params.entries()) value.drop_grad();
  }
  return result;
}

}  // namespace

StageResult run_stage1(std::span<const AlbumExample> train, std::span<const AlbumExample> val,
                       const Vocabulary& vocab, const TrainConfig& config, const TrainHooks& hooks,
                       const ParamStore* initial, std::size_t first_step) {
  ParamStore params = initial ? *initial : init_params(config.model, config.seed);
  params.unfreeze_all();
  params.freeze(groups::kReconstructor);
  const LossWeights weights{config.lambda, 0.0, false};
  StageResult result = run_stage(1, std::move(params), train, val, vocab, config, hooks, first_step, weights);
  result.params.unfreeze_all();
  result.last.unfreeze_all();
  return result;
}

StageResult run_stage2(const ParamStore& checkpoint, std::span<const AlbumExample> train,
                       std::span<const AlbumExample> val, const Vocabulary& vocab, const TrainConfig& config,
                       const TrainHooks& hooks, std::size_t first_step) {
  ParamStore params = checkpoint;
  params.unfreeze_all();
  params.freeze(groups::kPhotoEncoder);
  params.freeze(groups::kSceneEncoder);
  params.freeze(groups::kAttention);
  const LossWeights weights{config.lambda, config.mu, true};
  StageResult result = run_stage(2, std::move(params), train, val, vocab, config, hooks, first_step, weights);
  result.params.unfreeze_all();
  result.last.unfreeze_all();
  return result;
}

StageResult run_training(std::span<const AlbumExample> train, std::span<const AlbumExample> val,
                         const Vocabulary& vocab, const TrainConfig& config, const TrainHooks& hooks,
                         const ParamStore* initial) {
  switch (config.stage) {
    case Stage::one:
      return run_stage1(train, val, vocab, config, hooks, initial);
    case Stage::two: {
      if (!initial) throw ConfigError("stage 2 needs a stage-1 checkpoint");
      return run_stage2(*initial, train, val, vocab, config, hooks);
    }
    case Stage::all: {
      StageResult first = run_stage1(train, val, vocab, config, hooks, initial);
      StageResult second = run_stage2(first.params, train, val, vocab, config, hooks, first.steps + 1);
      second.entries.insert(second.entries.begin(), first.entries.begin(), first.entries.end());
      second.steps += first.steps;
      second.validations += first.validations;
      return second;
    }
  }
  throw ConfigError("unknown stage");
}

}  // namespace storyforge
