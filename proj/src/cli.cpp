// SPDX-License-Identifier: Apache-2.0
#include "storyforge/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "storyforge/album.hpp"
#include "storyforge/decoder.hpp"
#include "storyforge/diagnostics.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/photo_encoder.hpp"
#include "storyforge/run_config.hpp"
#include "storyforge/scene_encoder.hpp"
#include "storyforge/synth.hpp"
#include "storyforge/trainer.hpp"
#include "storyforge/vocabulary.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace storyforge {

std::string checkpoint_metadata(const ModelConfig& model, const json& extra) {
  json j = extra;
  j["model"] = model;
  return j.dump();
}

ModelConfig checkpoint_model(const Checkpoint& checkpoint) {
  json j;
  try {
    j = json::parse(checkpoint.metadata);
  } catch (const json::exception&) {
    throw FormatError("checkpoint metadata is not JSON", 0);
  }
  if (!j.is_object() || !j.contains("model")) throw FormatError("checkpoint metadata has no model config", 0);
  ModelConfig model;
  try {
    model = j.at("model").get<ModelConfig>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint model config: ") + e.what(), 0);
  }
  model.validate();
  check_params(checkpoint.params, model);
  return model;
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::map<std::string, std::string> defaults;
  std::function<int(const RunConfig&, std::ostream&, std::ostream&)> run;
};

const std::vector<std::string> kModelKeys = {"feature-dim", "photo-hidden", "attn-hidden", "dec-hidden",
                                             "embed-dim",   "max-photos",   "max-words",   "sentences"};
const std::vector<std::string> kTrainKeys = {"stage",      "lr",        "lambda",         "mu",
                                             "batch-size", "max-steps", "validate-every", "patience"};
const std::vector<std::string> kSynthKeys = {"albums",      "scenes-min", "scenes-max", "photos-min",
                                             "photos-max",  "synth-feature-dim", "clusters", "separation",
                                             "noise",       "synth-vocab", "template-min", "template-max",
                                             "sentences"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts)
    for (const auto& k : p)
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  return out;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Writes the resolved config as "<output>.cfg".
void write_config_beside(const RunConfig& cfg, const std::string& output, const std::string& command) {
  if (!output.empty()) cfg.write(output + ".cfg", command);
}

std::size_t infer_feature_dim(const RunConfig& cfg, const std::vector<AlbumRecord>& records) {
  const std::size_t requested = cfg.get_size("feature-dim");
  if (requested) return requested;
  for (const auto& r : records)
    if (!r.features.empty()) return r.features.front().size();
  throw ConfigError("cannot infer feature-dim from data without photos");
}

std::vector<AlbumExample> encode_records(const std::vector<AlbumRecord>& records, const Vocabulary& vocab,
                                         const DataLimits& limits) {
  std::vector<AlbumExample> out;
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(encode_album(records[i], vocab, limits, i + 1));
  return out;
}

Checkpoint load_model(const RunConfig& cfg, ModelConfig& model) {
  const std::string path = cfg.require("checkpoint");
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path);
  Checkpoint ckpt = load_checkpoint(path);
  model = checkpoint_model(ckpt);
  return ckpt;
}

// ---- commands ----------------------------------------------------------------

int command_synth(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const std::string output = cfg.require("output");
  const SynthData data = synth_dataset(cfg.synth_spec());
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
  write_album_records(output, data.albums);
  write_config_beside(cfg, output, "synth-data");
  out << "wrote " << data.albums.size() << " albums to " << output << "\n";
  return kExitOk;
}

int command_build_vocab(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto records = read_album_records(cfg.require("train"));
  const std::string path = cfg.require("vocab");
  const auto corpus = story_corpus(records);
  const auto min_count = static_cast<int>(cfg.get_size("min-count"));
  const Vocabulary vocab = Vocabulary::build(corpus, std::max(1, min_count));
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  vocab.save(path);
  write_config_beside(cfg, path, "build-vocab");
  out << "vocabulary of " << vocab.size() << " tokens written to " << path << "\n";
  return kExitOk;
}

struct TrainData {
  Vocabulary vocab;
  std::vector<AlbumExample> train;
  std::vector<AlbumExample> val;
  ModelConfig model;
};

TrainData load_train_data(const RunConfig& cfg) {
  const auto train_records = read_album_records(cfg.require("train"));
  Vocabulary vocab = Vocabulary::load(cfg.require("vocab"));
  const ModelConfig model = cfg.model_config(vocab.size(), infer_feature_dim(cfg, train_records));
  TrainData data{std::move(vocab), {}, {}, model};
  data.train = encode_records(train_records, data.vocab, model.data_limits());
  if (!cfg.get("val").empty()) data.val = encode_records(read_album_records(cfg.get("val")), data.vocab, model.data_limits());
  return data;
}

json train_summary(const TrainConfig& config, int stage, const StageResult& r) {
  json j;
  j["train"] = config;
  j["stage"] = stage;
  j["steps"] = r.steps;
  if (r.best_cider) j["best_cider"] = *r.best_cider;
  return j;
}

int command_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  TrainData data = load_train_data(cfg);
  const TrainConfig config = cfg.train_config(data.model);
  const fs::path dir = cfg.require("out-dir");
  fs::create_directories(dir);
  cfg.write(dir / "run.cfg", "train");

  std::optional<ParamStore> initial;
  if (!cfg.get("init-checkpoint").empty()) {
    Checkpoint ckpt = load_checkpoint(cfg.get("init-checkpoint"));
    if (!(checkpoint_model(ckpt) == data.model))
      throw ConfigError("init-checkpoint was trained with a different model configuration");
    initial = std::move(ckpt.params);
  } else if (config.stage == Stage::two) {
    throw ConfigError("stage 2 needs --init-checkpoint");
  }

  std::ofstream log = open_output(dir / "train.log");
  log << format_log_header(json(config)) << "\n";
  log.flush();

  int current_stage = 1;
  TrainHooks hooks;
  hooks.log = [&log](const std::string& line) { log << line << "\n"; };
  hooks.checkpoint = [&](const ParamStore& params, const std::string& kind) {
    if (kind == "diverged") {
      log.flush();
      save_checkpoint(dir / "diverged.ckpt", params,
                      checkpoint_metadata(data.model, json{{"train", config}, {"stage", current_stage}}));
    }
  };

  const auto finish_stage = [&](int stage, const StageResult& r, const fs::path& path) {
    save_checkpoint(path, r.params, checkpoint_metadata(data.model, train_summary(config, stage, r)));
    out << "stage " << stage << ": " << r.steps << " steps, " << r.validations << " validations";
    if (r.best_cider) out << ", best CIDEr " << fixed(*r.best_cider);
    if (r.stopped_early) out << ", stopped early";
    out << "\n";
  };

  try {
    if (config.stage == Stage::one || config.stage == Stage::all) {
      const StageResult first = run_stage1(data.train, data.val, data.vocab, config, hooks, initial ? &*initial : nullptr);
      finish_stage(1, first, dir / (config.stage == Stage::one ? "model.ckpt" : "stage1.ckpt"));
      if (config.stage == Stage::all) {
        current_stage = 2;
        const StageResult second = run_stage2(first.params, data.train, data.val, data.vocab, config, hooks,
                                              first.steps + 1);
        finish_stage(2, second, dir / "model.ckpt");
      }
    } else {
      current_stage = 2;
      const StageResult second = run_stage2(*initial, data.train, data.val, data.vocab, config, hooks);
      finish_stage(2, second, dir / "model.ckpt");
    }
  } catch (const DivergenceError& e) {
    log.flush();
    err << "training diverged: " << e.what() << "; last finite parameters in " << (dir / "diverged.ckpt").string()
        << "\n";
    return kExitRuntime;
  }
  out << "wrote " << (dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

/// The first photo always opens scene 1, so its flag is reported as 0.
std::vector<int> effective_flags(const std::vector<std::uint8_t>& flags) {
  std::vector<int> out(flags.begin(), flags.end());
  if (!out.empty()) out[0] = 0;
  return out;
}

nlohmann::ordered_json story_record(const AlbumExample& album, const StoryHypothesis& story, const Vocabulary& vocab) {
  json sentences = json::array(), log_probs = json::array(), alpha = json::array();
  for (const auto& s : story.sentences) {
    std::string text;
    for (const auto& w : decode_sentence(s.tokens, vocab)) text += (text.empty() ? "" : " ") + w;
    sentences.push_back(text);
    log_probs.push_back(s.log_prob);
  }
  for (const auto& a : story.alphas) alpha.push_back(a.data());
  nlohmann::ordered_json j;
  j["album_id"] = album.album_id;
  j["sentences"] = sentences;
  j["flags"] = effective_flags(story.flags);
  j["scenes"] = story.scene_count;
  j["log_probs"] = log_probs;
  j["alpha"] = alpha;
  return j;
}

int command_generate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  ModelConfig model;
  const Checkpoint ckpt = load_model(cfg, model);
  const Vocabulary vocab = Vocabulary::load(cfg.require("vocab"));
  if (vocab.size() != model.vocab_size) throw ConfigError("vocabulary size does not match the checkpoint");
  const auto albums = load_albums(cfg.require("data"), vocab, model.data_limits());
  const DecodeOptions options{std::max<std::size_t>(1, cfg.get_size("beam-width"))};

  const std::string output = cfg.get("output");
  std::ofstream file;
  if (!output.empty()) file = open_output(output);
  std::ostream& sink = output.empty() ? out : file;
  for (const auto& album : albums) {
    const auto story = generate_story(ckpt.params, model, album.features, options);
    sink << story_record(album, story, vocab).dump() << "\n";
  }
  write_config_beside(cfg, output, "generate");
  if (!output.empty()) out << "wrote " << albums.size() << " stories to " << output << "\n";
  return kExitOk;
}

int command_inspect_scenes(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  ModelConfig model;
  const Checkpoint ckpt = load_model(cfg, model);
  const auto records = read_album_records(cfg.require("data"));

  const std::string output = cfg.get("output");
  std::ofstream file;
  if (!output.empty()) file = open_output(output);
  std::ostream& sink = output.empty() ? out : file;
  sink << "album_id\tphoto\tflag\tsoft\tscene\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::vector<NumArray> features;
    for (const auto& f : records[r].features) {
      if (features.size() == model.max_photos) break;
      if (f.size() != model.feature_dim)
        throw FormatError("feature length " + std::to_string(f.size()) + " does not match the model's " +
                              std::to_string(model.feature_dim),
                          r + 1);
      features.push_back(NumArray::vector(f));
    }
    if (features.empty()) throw FormatError("album has no photos", r + 1);
    const PhotoEncoding enc = encode_photos(ckpt.params, features);
    const SceneSegmentation seg = encode_scenes(ckpt.params, enc.columns);
    const auto flags = effective_flags(seg.flags);
    std::size_t scene = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      scene += flags[i];
      sink << records[r].album_id << "\t" << i << "\t" << flags[i] << "\t" << fixed(seg.soft[i], 6) << "\t"
           << scene << "\n";
    }
  }
  write_config_beside(cfg, output, "inspect-scenes");
  return kExitOk;
}

std::vector<std::string> flatten_story(const json& story) {
  std::vector<std::string> tokens;
  for (const auto& sentence : story) {
    const auto words = tokenize(sentence.get<std::string>());
    tokens.insert(tokens.end(), words.begin(), words.end());
  }
  return tokens;
}

int command_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto records = read_album_records(cfg.require("data"));
  std::vector<EvalPair> corpus;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    EvalPair pair;
    for (const auto& story : r.stories) pair.references.push_back(flatten_story(json(story)));
    if (pair.references.empty()) throw FormatError("album '" + r.album_id + "' has no reference story", 0);
    if (!index.emplace(r.album_id, corpus.size()).second) throw FormatError("duplicate album '" + r.album_id + "'", 0);
    corpus.push_back(std::move(pair));
  }

  if (!cfg.get("candidates").empty()) {
    std::ifstream in(cfg.get("candidates"));
    if (!in) throw Error("cannot read " + cfg.get("candidates"));
    std::set<std::string> seen;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
        const auto id = j.at("album_id").get<std::string>();
        const auto it = index.find(id);
        if (it == index.end()) throw FormatError("candidate for unknown album '" + id + "'", number);
        if (!seen.insert(id).second) throw FormatError("second candidate for album '" + id + "'", number);
        corpus[it->second].candidate = flatten_story(j.at("sentences"));
      } catch (const json::exception& e) {
        throw FormatError(std::string("bad candidate record: ") + e.what(), number);
      }
    }
    for (const auto& [id, _] : index)
      if (!seen.count(id)) throw FormatError("no candidate for album '" + id + "'", 0);
  } else {
    ModelConfig model;
    const Checkpoint ckpt = load_model(cfg, model);
    const Vocabulary vocab = Vocabulary::load(cfg.require("vocab"));
    const auto albums = encode_records(records, vocab, model.data_limits());
    const DecodeOptions options{std::max<std::size_t>(1, cfg.get_size("beam-width"))};
    const auto pairs = generate_pairs(ckpt.params, model, albums, vocab, options);
    for (std::size_t i = 0; i < pairs.size(); ++i) corpus[i].candidate = pairs[i].candidate;
  }

  const auto b = bleu(corpus);
  std::string text;
  const std::string n = std::to_string(corpus.size());
  for (std::size_t k = 0; k < b.size(); ++k) text += "BLEU-" + std::to_string(k + 1) + " " + fixed(b[k]) + " " + n + "\n";
  text += "ROUGE-L " + fixed(rouge_l(corpus)) + " " + n + "\n";
  text += "CIDEr " + fixed(cider(corpus)) + " " + n + "\n";
  out << text;
  const std::string output = cfg.get("output");
  if (!output.empty()) {
    open_output(output) << text;
    write_config_beside(cfg, output, "evaluate");
  }
  return kExitOk;
}

int command_grad_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const PipelineCheckSpec spec = cfg.pipeline_check_spec();
  const std::uint64_t first = cfg.get_u64("seed");
  const std::size_t seeds = cfg.get_size("seeds");
  const double threshold = cfg.get_double("threshold");
  if (seeds == 0) throw ConfigError("--seeds must be positive");
  std::string text;
  double worst = 0.0;
  for (std::uint64_t s = first; s < first + seeds; ++s) {
    const GradCheckReport r = pipeline_grad_check(spec, s);
    worst = std::max(worst, r.max_relative_error);
    text += "seed " + std::to_string(s) + " coordinates " + std::to_string(r.coordinates) + " max_rel_error " +
            sci(r.max_relative_error) + " (" + r.worst_param + ") worst_coordinate " + sci(r.max_coordinate_error) +
            " (" + r.worst_coordinate_param + "[" + std::to_string(r.worst_index) + "])\n";
  }
  const bool pass = worst < threshold;
  text += std::string(pass ? "PASS" : "FAIL") + " max_rel_error " + sci(worst) + " threshold " + sci(threshold) + "\n";
  out << text;
  const std::string output = cfg.get("output");
  if (!output.empty()) {
    open_output(output) << text;
    write_config_beside(cfg, output, "grad-check");
  }
  if (!pass) err << "gradient check failed\n";
  return pass ? kExitOk : kExitRuntime;
}

int command_sweep(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<AlbumRecord> train_records, val_records;
  if (!cfg.get("train").empty()) {
    train_records = read_album_records(cfg.get("train"));
  } else {
    train_records = synth_dataset(cfg.synth_spec()).albums;
  }
  if (!cfg.get("val").empty()) val_records = read_album_records(cfg.get("val"));
  const Vocabulary vocab = !cfg.get("vocab").empty()
                               ? Vocabulary::load(cfg.get("vocab"))
                               : Vocabulary::build(story_corpus(train_records),
                                                   std::max(1, static_cast<int>(cfg.get_size("min-count"))));
  const ModelConfig model = cfg.model_config(vocab.size(), infer_feature_dim(cfg, train_records));
  const auto train = encode_records(train_records, vocab, model.data_limits());
  const auto val = val_records.empty() ? train : encode_records(val_records, vocab, model.data_limits());
  const TrainConfig base = cfg.train_config(model);

  const std::string grid = cfg.get("grid");
  if (grid != "lambda" && grid != "mu" && grid != "both") throw ConfigError("--grid must be lambda, mu or both");

  std::ofstream file;
  const std::string output = cfg.get("output");
  if (!output.empty()) file = open_output(output);

  const auto cell = [&](const std::string& name, double lambda, double mu, Stage stage) {
    TrainConfig config = base;
    config.lambda = lambda;
    config.mu = mu;
    config.stage = stage;
    const StageResult result = run_training(train, val, vocab, config);
    const auto pairs = generate_pairs(result.params, model, val, vocab);
    const auto b = bleu(pairs);
    std::string line = "grid=" + name + " lambda=" + fixed(lambda, 1) + " mu=" + fixed(mu, 1) +
                       " stage=" + to_string(stage) + " steps=" + std::to_string(result.steps);
    for (std::size_t k = 0; k < b.size(); ++k) line += " BLEU-" + std::to_string(k + 1) + "=" + fixed(b[k]);
    line += " ROUGE-L=" + fixed(rouge_l(pairs)) + " CIDEr=" + fixed(cider(pairs)) + "\n";
    out << line << std::flush;
    if (file) file << line << std::flush;
  };

  // ranking weight with the reconstructor switched off, then the reconstruction
  // weight with the ranking weight at its default
  if (grid != "mu")
    for (int k = 0; k <= 5; ++k) cell("lambda", 0.1 * k, 0.0, Stage::one);
  if (grid != "lambda")
    for (int k = 0; k <= 5; ++k) cell("mu", kDefaultLambda, 0.2 * k, Stage::all);
  write_config_beside(cfg, output, "sweep");
  return kExitOk;
}

std::vector<Command> commands() {
  return {
      {"synth-data", "write a clustered synthetic album corpus", join({{"seed", "output"}, kSynthKeys}), {},
       command_synth},
      {"build-vocab", "build a vocabulary from training stories", {"train", "vocab", "min-count"}, {},
       command_build_vocab},
      {"train", "train the model (stage 1, stage 2 or both)",
       join({{"seed", "train", "val", "vocab", "init-checkpoint", "out-dir"}, kModelKeys, kTrainKeys}), {},
       command_train},
      {"generate", "generate stories for albums", {"checkpoint", "vocab", "data", "output", "beam-width"}, {},
       command_generate},
      {"inspect-scenes", "print per-photo boundary decisions", {"checkpoint", "data", "output"}, {},
       command_inspect_scenes},
      {"evaluate", "score stories with BLEU, ROUGE-L and CIDEr",
       {"data", "candidates", "checkpoint", "vocab", "output", "beam-width"}, {}, command_evaluate},
      {"grad-check", "finite-difference check of the full model gradient",
       {"seed", "seeds", "delta", "threshold", "feature-dim", "photo-hidden", "attn-hidden", "dec-hidden",
        "embed-dim", "vocab-size", "photos-min", "photos-max", "sentences", "lambda", "mu", "output"},
       {{"feature-dim", "8"},
        {"photo-hidden", "6"},
        {"attn-hidden", "6"},
        {"dec-hidden", "6"},
        {"embed-dim", "6"},
        {"photos-min", "3"},
        {"photos-max", "6"}},
       command_grad_check},
      {"sweep", "train over the lambda and mu grids and report metrics per cell",
       join({{"seed", "train", "val", "vocab", "min-count", "grid", "output"}, kModelKeys, kTrainKeys, kSynthKeys}),
       {{"min-count", "1"}}, command_sweep},
  };
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"storyforge: hierarchical photo-scene storytelling model", "storyforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "storyforge 0.1.0");

  const auto table = commands();
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_path;
  std::vector<CLI::App*> subs;
  for (const auto& cmd : table) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path[cmd.name], "key = value config file (default: $STORYFORGE_CONFIG)");
    for (const auto& key : cmd.keys) {
      const auto& all = config_keys();
      const auto it = std::find_if(all.begin(), all.end(), [&](const ConfigKey& k) { return k.name == key; });
      std::string help = it->help;
      const auto d = cmd.defaults.count(key) ? cmd.defaults.at(key) : it->default_value;
      if (!d.empty()) help += " [" + d + "]";
      sub->add_option("--" + key, flags[cmd.name][key], help);
    }
    subs.push_back(sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (std::size_t c = 0; c < table.size(); ++c) {
    if (!subs[c]->parsed()) continue;
    const Command& cmd = table[c];
    RunConfig cfg;
    try {
      for (const auto& [k, v] : cmd.defaults) cfg.set_default(k, v);
      std::string file = config_path[cmd.name];
      if (file.empty())
        if (const char* env = std::getenv("STORYFORGE_CONFIG")) file = env;
      if (!file.empty()) cfg.load_file(file);
      for (const auto& key : cmd.keys)
        if (subs[c]->count("--" + key)) cfg.set(key, flags[cmd.name][key]);
    } catch (const FormatError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitUsage;
    }
    try {
      return cmd.run(cfg, out, err);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace storyforge
