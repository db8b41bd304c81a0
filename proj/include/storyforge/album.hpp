// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "storyforge/num_array.hpp"
#include "storyforge/vocabulary.hpp"

namespace storyforge {

inline constexpr std::size_t kDefaultMaxPhotos = 40;
inline constexpr std::size_t kDefaultSentences = 5;

/// One album as stored on disk: raw features and untokenized story text.
struct AlbumRecord {
  std::string album_id;
  std::vector<std::vector<double>> features;
  /// Each story is a list of sentence strings.
  std::vector<std::vector<std::string>> stories;
  std::optional<std::vector<int>> gold_boundaries;

  bool operator==(const AlbumRecord&) const = default;
};

using Sentence = std::vector<TokenId>;
using Story = std::vector<Sentence>;

/// An album ready for the model.
struct AlbumExample {
  std::string album_id;
  std::vector<NumArray> features;
  /// Encoded references: each sentence holds at most max_words ids plus EOS.
  std::vector<Story> stories;
  /// Tokenized, untruncated reference text used for scoring.
  std::vector<std::vector<std::vector<std::string>>> story_tokens;
  std::optional<std::vector<std::uint8_t>> gold_boundaries;

  std::size_t photo_count() const { return features.size(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }
};

struct DataLimits {
  std::size_t max_photos = kDefaultMaxPhotos;
  std::size_t max_words = kDefaultMaxWords;
  std::size_t sentences = kDefaultSentences;
  /// Expected feature length; 0 accepts any length that is consistent within the file.
  std::size_t feature_dim = 0;
};

// Album file: one JSON object per line,
//   {"album_id": str, "features": [[f64 x F] x m], "stories": [[str x n] x refs],
//    "gold_boundaries": [0|1 x m]}   (gold_boundaries optional)
std::vector<AlbumRecord> read_album_records(const std::filesystem::path& path);
void write_album_records(const std::filesystem::path& path, std::span<const AlbumRecord> records);

/// Tokenizes, truncates and validates one record. `line` is used in error messages.
AlbumExample encode_album(const AlbumRecord& record, const Vocabulary& vocab,
                          const DataLimits& limits, std::size_t line = 0);
/// Photo streams longer than max_photos keep their first max_photos photos.
/// Throws FormatError (with line number) on malformed records, feature-length
/// mismatches, or stories whose sentence count differs from limits.sentences.
std::vector<AlbumExample> load_albums(const std::filesystem::path& path, const Vocabulary& vocab,
                                      const DataLimits& limits = {});

/// Every sentence of every story, tokenized; the corpus for Vocabulary::build.
std::vector<std::vector<std::string>> story_corpus(std::span<const AlbumRecord> records);

/// Reference stories as flat token lists (sentences concatenated in order).
std::vector<std::vector<std::string>> flat_references(const AlbumExample& album);

}  // namespace storyforge
