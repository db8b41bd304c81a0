// SPDX-License-Identifier: Apache-2.0
#include "storyforge/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "storyforge/errors.hpp"

namespace storyforge {

void SynthSpec::validate() const {
  if (albums == 0) throw ConfigError("synth: albums must be positive");
  if (scenes_min == 0 || scenes_min > scenes_max) throw ConfigError("synth: bad scenes range");
  if (photos_min == 0 || photos_min > photos_max) throw ConfigError("synth: bad photos range");
  if (feature_dim == 0) throw ConfigError("synth: feature_dim must be positive");
  if (clusters < 2 && scenes_max > 1) throw ConfigError("synth: need at least 2 clusters for multi-scene albums");
  if (clusters == 0) throw ConfigError("synth: clusters must be positive");
  if (!(cluster_separation > 0)) throw ConfigError("synth: cluster_separation must be > 0");
  if (noise_scale < 0) throw ConfigError("synth: noise_scale must be >= 0");
  if (vocab_size == 0) throw ConfigError("synth: vocab_size must be positive");
  if (template_min == 0 || template_min > template_max) throw ConfigError("synth: bad template length range");
  if (sentences == 0) throw ConfigError("synth: sentences must be positive");
}

SynthData synth_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  SynthData data;
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    std::vector<double> center(spec.feature_dim);
    for (auto& v : center) v = spec.cluster_separation * gauss(rng);
    data.centers.push_back(std::move(center));
  }

  std::set<std::string> seen;
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    std::string text;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t len = uniform(spec.template_min, spec.template_max);
      text.clear();
      for (std::size_t k = 0; k < len; ++k) {
        if (k) text += ' ';
        text += "w" + std::to_string(uniform(0, spec.vocab_size - 1));
      }
      if (!seen.count(text)) break;
    }
    seen.insert(text);
    data.templates.push_back(text);
  }

  for (std::size_t a = 0; a < spec.albums; ++a) {
    const std::size_t scenes = uniform(spec.scenes_min, spec.scenes_max);
    std::vector<std::size_t> scene_cluster;
    if (spec.clusters >= scenes) {
      std::vector<std::size_t> ids(spec.clusters);
      std::iota(ids.begin(), ids.end(), 0);
      for (std::size_t s = 0; s < scenes; ++s) {
        std::swap(ids[s], ids[uniform(s, spec.clusters - 1)]);
        scene_cluster.push_back(ids[s]);
      }
    } else {
      for (std::size_t s = 0; s < scenes; ++s) {
        std::size_t c = uniform(0, spec.clusters - 1);
        while (s > 0 && c == scene_cluster.back()) c = uniform(0, spec.clusters - 1);
        scene_cluster.push_back(c);
      }
    }

    AlbumRecord rec;
    rec.album_id = "synth-" + std::to_string(a);
    std::vector<int> gold;
    std::vector<std::size_t> clusters;
    for (std::size_t s = 0; s < scenes; ++s) {
      const std::size_t photos = uniform(spec.photos_min, spec.photos_max);
      for (std::size_t p = 0; p < photos; ++p) {
        std::vector<double> f = data.centers[scene_cluster[s]];
        if (spec.noise_scale > 0)
          for (auto& v : f) v += spec.noise_scale * gauss(rng);
        rec.features.push_back(std::move(f));
        gold.push_back(s > 0 && p == 0 ? 1 : 0);
        clusters.push_back(scene_cluster[s]);
      }
    }
    std::vector<std::string> story;
    for (std::size_t j = 0; j < spec.sentences; ++j)
      story.push_back(data.templates[scene_cluster[j * scenes / spec.sentences]]);
    rec.stories.push_back(std::move(story));
    rec.gold_boundaries = std::move(gold);
    data.albums.push_back(std::move(rec));
    data.photo_clusters.push_back(std::move(clusters));
  }
  return data;
}

}  // namespace storyforge
