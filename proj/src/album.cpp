// SPDX-License-Identifier: Apache-2.0
#include "storyforge/album.hpp"

#include <fstream>

#include "json.hpp"
#include "storyforge/errors.hpp"

namespace storyforge {

namespace {

using nlohmann::json;

AlbumRecord parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  try {
    AlbumRecord rec;
    if (!j.is_object()) throw FormatError("record is not an object", line_no);
    for (const auto& [key, _] : j.items())
      if (key != "album_id" && key != "features" && key != "stories" && key != "gold_boundaries")
        throw FormatError("unknown field '" + key + "'", line_no);
    rec.album_id = j.at("album_id").get<std::string>();
    rec.features = j.at("features").get<std::vector<std::vector<double>>>();
    rec.stories = j.at("stories").get<std::vector<std::vector<std::string>>>();
    if (j.contains("gold_boundaries"))
      rec.gold_boundaries = j.at("gold_boundaries").get<std::vector<int>>();
    return rec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad record: ") + e.what(), line_no);
  }
}

}  // namespace

std::vector<AlbumRecord> read_album_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("albums: cannot open " + path.string());
  std::vector<AlbumRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(line, line_no));
  }
  return records;
}

void write_album_records(const std::filesystem::path& path, std::span<const AlbumRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("albums: cannot write " + path.string());
  for (const auto& rec : records) {
    json j;
    j["album_id"] = rec.album_id;
    j["features"] = rec.features;
    j["stories"] = rec.stories;
    if (rec.gold_boundaries) j["gold_boundaries"] = *rec.gold_boundaries;
    out << j.dump() << '\n';
  }
}

AlbumExample encode_album(const AlbumRecord& record, const Vocabulary& vocab,
                          const DataLimits& limits, std::size_t line) {
  if (record.features.empty()) throw FormatError("album '" + record.album_id + "' has no photos", line);
  if (record.stories.empty()) throw FormatError("album '" + record.album_id + "' has no stories", line);
  if (record.gold_boundaries && record.gold_boundaries->size() != record.features.size())
    throw FormatError("gold_boundaries length differs from photo count", line);

  AlbumExample ex;
  ex.album_id = record.album_id;
  const std::size_t m = std::min(record.features.size(), limits.max_photos);
  const std::size_t dim = limits.feature_dim ? limits.feature_dim : record.features.front().size();
  if (dim == 0) throw FormatError("empty feature vector", line);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& f = record.features[i];
    if (f.size() != dim)
      throw FormatError("photo " + std::to_string(i) + " has feature length " +
                            std::to_string(f.size()) + ", expected " + std::to_string(dim),
                        line);
    ex.features.push_back(NumArray::vector(f));
  }
  for (std::size_t s = 0; s < record.stories.size(); ++s) {
    const auto& story = record.stories[s];
    if (story.size() != limits.sentences)
      throw FormatError("story " + std::to_string(s) + " has " + std::to_string(story.size()) +
                            " sentences, expected " + std::to_string(limits.sentences),
                        line);
    Story encoded;
    std::vector<std::vector<std::string>> tokens;
    for (const auto& sentence : story) {
      tokens.push_back(tokenize(sentence));
      encoded.push_back(encode_sentence(tokens.back(), vocab, limits.max_words));
    }
    ex.stories.push_back(std::move(encoded));
    ex.story_tokens.push_back(std::move(tokens));
  }
  if (record.gold_boundaries) {
    std::vector<std::uint8_t> gold;
    for (std::size_t i = 0; i < m; ++i) {
      const int b = (*record.gold_boundaries)[i];
      if (b != 0 && b != 1) throw FormatError("gold_boundaries entries must be 0 or 1", line);
      gold.push_back(static_cast<std::uint8_t>(b));
    }
    ex.gold_boundaries = std::move(gold);
  }
  return ex;
}

std::vector<AlbumExample> load_albums(const std::filesystem::path& path, const Vocabulary& vocab,
                                      const DataLimits& limits) {
  std::ifstream in(path);
  if (!in) throw Error("albums: cannot open " + path.string());
  std::vector<AlbumExample> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = limits.feature_dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DataLimits local = limits;
    local.feature_dim = dim;
    out.push_back(encode_album(parse_record(line, line_no), vocab, local, line_no));
    dim = out.back().feature_dim();
  }
  return out;
}

std::vector<std::vector<std::string>> story_corpus(std::span<const AlbumRecord> records) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& rec : records)
    for (const auto& story : rec.stories)
      for (const auto& sentence : story) corpus.push_back(tokenize(sentence));
  return corpus;
}

std::vector<std::vector<std::string>> flat_references(const AlbumExample& album) {
  std::vector<std::vector<std::string>> refs;
  for (const auto& story : album.story_tokens) {
    std::vector<std::string> flat;
    for (const auto& sentence : story) flat.insert(flat.end(), sentence.begin(), sentence.end());
    refs.push_back(std::move(flat));
  }
  return refs;
}

}  // namespace storyforge
