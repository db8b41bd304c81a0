// SPDX-License-Identifier: Apache-2.0
#include "storyforge/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "storyforge/errors.hpp"

namespace storyforge {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "seed for every random choice of the run"},
      // paths
      {"train", "", "training albums (JSONL)"},
      {"val", "", "validation albums (JSONL); empty disables validation"},
      {"data", "", "albums to generate for, inspect or evaluate against (JSONL)"},
      {"vocab", "", "vocabulary file"},
      {"checkpoint", "", "model checkpoint to read"},
      {"init-checkpoint", "", "checkpoint to start training from (required for stage 2)"},
      {"candidates", "", "generated stories (JSONL from generate)"},
      {"out-dir", "", "directory for training or sweep outputs"},
      {"output", "", "output file; empty writes to stdout where supported"},
      // vocabulary
      {"min-count", "5", "minimum token count kept in the vocabulary"},
      // model
      {"feature-dim", "0", "photo feature length; 0 infers it from the data"},
      {"photo-hidden", "16", "photo GRU hidden size H_p (D_v = 2 H_p)"},
      {"attn-hidden", "32", "attention GRU hidden size"},
      {"dec-hidden", "32", "sentence decoder GRU hidden size"},
      {"embed-dim", "32", "word embedding size"},
      {"vocab-size", "20", "vocabulary size for grad-check models"},
      {"max-photos", "40", "photos kept per album"},
      {"max-words", "25", "words kept per sentence (EOS excluded)"},
      {"sentences", "5", "sentences per story"},
      // training
      {"stage", "all", "1, 2 or all"},
      {"lr", "0.0004", "Adam learning rate"},
      {"lambda", "0.2", "ranking loss weight"},
      {"mu", "0.8", "reconstruction loss weight"},
      {"batch-size", "8", "examples per optimizer step"},
      {"max-steps", "2000", "optimizer steps per stage"},
      {"validate-every", "0", "steps between validations; 0 means once per epoch"},
      {"patience", "30", "non-improving validations before stopping"},
      // generation
      {"beam-width", "1", "1 decodes greedily"},
      // synthetic data
      {"albums", "8", "synthetic albums"},
      {"scenes-min", "2", "fewest scenes per synthetic album"},
      {"scenes-max", "4", "most scenes per synthetic album"},
      {"photos-min", "1", "fewest photos per synthetic scene (grad-check: per album)"},
      {"photos-max", "3", "most photos per synthetic scene (grad-check: per album)"},
      {"synth-feature-dim", "16", "synthetic feature length"},
      {"clusters", "8", "synthetic cluster count"},
      {"separation", "3.0", "scale of synthetic cluster centers"},
      {"noise", "0.1", "scale of synthetic per-photo noise"},
      {"synth-vocab", "26", "content words available to synthetic templates"},
      {"template-min", "3", "shortest synthetic template"},
      {"template-max", "5", "longest synthetic template"},
      // gradient check
      {"seeds", "20", "grad-check: number of consecutive seeds"},
      {"delta", "1e-5", "grad-check: finite-difference step"},
      {"threshold", "1e-4", "grad-check: largest accepted relative error"},
      // sweep
      {"grid", "both", "sweep grid: lambda, mu or both"},
  };
  return keys;
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string k = normalize_key(key);
  if (!values_.count(k)) throw ConfigError("unknown config key '" + key + "'");
  values_[k] = value;
  explicit_[k] = true;
}

void RunConfig::set_default(const std::string& key, const std::string& value) {
  const std::string k = normalize_key(key);
  if (!values_.count(k)) throw ConfigError("unknown config key '" + key + "'");
  if (!explicitly_set(k)) values_[k] = value;
}

bool RunConfig::explicitly_set(const std::string& key) const {
  const auto it = explicit_.find(normalize_key(key));
  return it != explicit_.end() && it->second;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw FormatError("config: expected 'key = value'", number);
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw FormatError("config: missing key", number);
    try {
      set(key, trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(normalize_key(key));
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::require(const std::string& key) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError("missing required setting --" + normalize_key(key));
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("--" + normalize_key(key) + ": expected a number, got '" + v + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("--" + normalize_key(key) + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

std::string RunConfig::dump(const std::string& command) const {
  std::ostringstream out;
  out << "# storyforge " << command << " resolved configuration\n";
  for (const auto& k : config_keys()) out << k.name << " = " << values_.at(k.name) << "\n";
  return out.str();
}

void RunConfig::write(const std::filesystem::path& path, const std::string& command) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << dump(command);
}

ModelConfig RunConfig::model_config(std::size_t vocab_size, std::size_t feature_dim) const {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.photo_hidden = get_size("photo-hidden");
  c.attn_hidden = get_size("attn-hidden");
  c.dec_hidden = get_size("dec-hidden");
  c.embed_dim = get_size("embed-dim");
  c.vocab_size = vocab_size;
  c.max_photos = get_size("max-photos");
  c.max_words = get_size("max-words");
  c.sentences = get_size("sentences");
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config(const ModelConfig& model) const {
  TrainConfig c;
  c.model = model;
  c.stage = parse_stage(get("stage"));
  c.lr = get_double("lr");
  c.lambda = get_double("lambda");
  c.mu = get_double("mu");
  c.batch_size = get_size("batch-size");
  c.max_steps = get_size("max-steps");
  c.validate_every = get_size("validate-every");
  c.patience = get_size("patience");
  c.seed = get_u64("seed");
  c.validate();
  return c;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.albums = get_size("albums");
  s.scenes_min = get_size("scenes-min");
  s.scenes_max = get_size("scenes-max");
  s.photos_min = get_size("photos-min");
  s.photos_max = get_size("photos-max");
  s.feature_dim = get_size("synth-feature-dim");
  s.clusters = get_size("clusters");
  s.cluster_separation = get_double("separation");
  s.noise_scale = get_double("noise");
  s.vocab_size = get_size("synth-vocab");
  s.template_min = get_size("template-min");
  s.template_max = get_size("template-max");
  s.sentences = get_size("sentences");
  s.seed = get_u64("seed");
  s.validate();
  return s;
}

PipelineCheckSpec RunConfig::pipeline_check_spec() const {
  PipelineCheckSpec s;
  s.feature_dim = get_size("feature-dim");
  s.photo_hidden = get_size("photo-hidden");
  s.attn_hidden = get_size("attn-hidden");
  s.dec_hidden = get_size("dec-hidden");
  s.embed_dim = get_size("embed-dim");
  s.vocab_size = get_size("vocab-size");
  s.photos_min = get_size("photos-min");
  s.photos_max = get_size("photos-max");
  s.sentences = get_size("sentences");
  s.lambda = get_double("lambda");
  s.mu = get_double("mu");
  s.delta = get_double("delta");
  if (s.feature_dim == 0) throw ConfigError("grad-check: feature-dim must be positive");
  if (s.vocab_size <= kSpecialCount) throw ConfigError("grad-check: vocab-size must exceed the special tokens");
  return s;
}

}  // namespace storyforge
