// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "storyforge/album.hpp"

namespace storyforge {

/// Parameters of the clustered synthetic corpus. Ranges are inclusive.
struct SynthSpec {
  std::size_t albums = 8;
  std::size_t scenes_min = 2;
  std::size_t scenes_max = 4;
  std::size_t photos_min = 1;
  std::size_t photos_max = 3;
  std::size_t feature_dim = 16;
  std::size_t clusters = 8;
  double cluster_separation = 3.0;
  double noise_scale = 0.1;
  /// Number of distinct content words available to the templates.
  std::size_t vocab_size = 26;
  std::size_t template_min = 3;
  std::size_t template_max = 5;
  std::size_t sentences = kDefaultSentences;
  std::uint64_t seed = 1;

  /// Throws ConfigError on an inconsistent spec.
  void validate() const;
};

struct SynthData {
  std::vector<AlbumRecord> albums;
  /// Cluster centers, one per cluster id.
  std::vector<std::vector<double>> centers;
  /// Sentence template (space-separated words) for each cluster id.
  std::vector<std::string> templates;
  /// Cluster id of every photo, per album.
  std::vector<std::vector<std::size_t>> photo_clusters;
};

/// Albums are sequences of scenes; every photo of a scene is its cluster center
/// plus Gaussian noise, and consecutive scenes use different clusters. Sentence j
/// of the single reference story is the template of scene floor(j * scenes / n).
/// gold_boundaries marks the first photo of every scene after the first.
/// Deterministic given the seed.
SynthData synth_dataset(const SynthSpec& spec);

}  // namespace storyforge
