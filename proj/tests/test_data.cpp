// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "storyforge/album.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/synth.hpp"
#include "storyforge/vocabulary.hpp"

using namespace storyforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "storyforge_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::vector<std::vector<std::string>> repeat(const std::vector<std::string>& s, int n) {
  return std::vector<std::vector<std::string>>(n, s);
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("The cat, sat.") == std::vector<std::string>{"the", "cat", ",", "sat", "."});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("vocabulary thresholds") {
  CHECK(kDefaultMinCount == 5);
  auto corpus = repeat({"common", "words"}, 5);
  for (int i = 0; i < 4; ++i) corpus.push_back({"rare"});
  const auto vocab = Vocabulary::build(corpus);
  CHECK(vocab.contains("common"));
  CHECK(vocab.contains("words"));
  CHECK_FALSE(vocab.contains("rare"));
  CHECK(vocab.id("rare") == kUnk);
  CHECK(vocab.size() == kSpecialCount + 2);
  CHECK(vocab.token(kEos) != vocab.token(kUnk));
  CHECK_THROWS_AS(vocab.token(99), DimensionError);
  CHECK_THROWS(Vocabulary::build(std::vector<std::vector<std::string>>{}));

  // one sentence repeated five times keeps every token
  const auto all = Vocabulary::build(repeat({"a", "b", "c"}, 5));
  CHECK(all.size() == kSpecialCount + 3);
}

TEST_CASE("vocabulary ordering and persistence") {
  std::vector<std::vector<std::string>> corpus{{"b", "a", "c", "c"}, {"b", "c"}};
  const auto vocab = Vocabulary::build(corpus, 1);
  CHECK(vocab.token(kSpecialCount) == "c");
  CHECK(vocab.token(kSpecialCount + 1) == "b");
  CHECK(vocab.token(kSpecialCount + 2) == "a");
  const auto path = scratch("vocab.txt");
  vocab.save(path);
  const auto back = Vocabulary::load(path);
  CHECK(back.tokens() == vocab.tokens());
  CHECK(back.min_count() == 1);
  write_text(scratch("bad_vocab.txt"), "not a header\nx\n");
  CHECK_THROWS_AS(Vocabulary::load(scratch("bad_vocab.txt")), FormatError);
}

TEST_CASE("sentence encoding") {
  CHECK(kDefaultMaxWords == 25);
  const auto vocab = Vocabulary::build(repeat({"w"}, 5));
  std::vector<std::string> long_sentence(30, "w");
  const auto ids = encode_sentence(long_sentence, vocab);
  CHECK(ids.size() == 26);
  CHECK(ids.back() == kEos);
  CHECK(encode_sentence(std::vector<std::string>{}, vocab) == std::vector<TokenId>{kEos});
  const std::vector<TokenId> generated{vocab.id("w"), kEos, vocab.id("w")};
  CHECK(decode_sentence(generated, vocab) == std::vector<std::string>{"w"});
}

TEST_CASE("album records") {
  CHECK(kDefaultMaxPhotos == 40);
  CHECK(kDefaultSentences == 5);
  const auto vocab = Vocabulary::build(repeat({"a", "b"}, 5));
  const std::vector<std::string> story(5, "a b");

  SUBCASE("round trip") {
    AlbumRecord r{"x", {{1.0, 2.0}, {3.0, 4.5}}, {story}, std::vector<int>{0, 1}};
    write_album_records(scratch("albums.jsonl"), std::vector<AlbumRecord>{r});
    const auto back = read_album_records(scratch("albums.jsonl"));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);
    const auto albums = load_albums(scratch("albums.jsonl"), vocab);
    CHECK(albums[0].photo_count() == 2);
    CHECK(albums[0].stories[0].size() == 5);
    CHECK(albums[0].gold_boundaries->at(1) == 1);
  }
  SUBCASE("long albums are truncated") {
    AlbumRecord r{"x", std::vector<std::vector<double>>(50, {0.5}), {story}, std::nullopt};
    const auto a = encode_album(r, vocab, DataLimits{});
    CHECK(a.photo_count() == 40);
  }
  SUBCASE("wrong sentence count") {
    AlbumRecord r{"x", {{1.0}}, {std::vector<std::string>(4, "a")}, std::nullopt};
    CHECK_THROWS_AS(encode_album(r, vocab, DataLimits{}), FormatError);
  }
  SUBCASE("malformed line reports its number") {
    write_text(scratch("broken.jsonl"),
               "{\"album_id\":\"a\",\"features\":[[1]],\"stories\":[[\"a\",\"a\",\"a\",\"a\",\"a\"]]}\n{oops\n");
    try {
      load_albums(scratch("broken.jsonl"), vocab);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("feature length mismatch") {
    AlbumRecord r{"x", {{1.0, 2.0}, {3.0}}, {story}, std::nullopt};
    CHECK_THROWS_AS(encode_album(r, vocab, DataLimits{}), FormatError);
    AlbumRecord s{"y", {{1.0, 2.0}}, {story}, std::nullopt};
    DataLimits limits;
    limits.feature_dim = 3;
    CHECK_THROWS_AS(encode_album(s, vocab, limits), FormatError);
  }
}

TEST_CASE("synthetic corpus") {
  SynthSpec spec;
  spec.noise_scale = 0.0;
  spec.albums = 6;
  const auto data = synth_dataset(spec);
  CHECK(data.albums.size() == 6);
  for (std::size_t a = 0; a < data.albums.size(); ++a) {
    const auto& album = data.albums[a];
    const auto& gold = *album.gold_boundaries;
    CHECK(gold.size() == album.features.size());
    CHECK(gold[0] == 0);
    for (std::size_t i = 1; i < album.features.size(); ++i) {
      // noise-free photos of one scene are identical; a new scene changes cluster
      if (gold[i])
        CHECK(album.features[i] != album.features[i - 1]);
      else
        CHECK(album.features[i] == album.features[i - 1]);
    }
    REQUIRE(album.stories.size() == 1);
    CHECK(album.stories[0].size() == spec.sentences);
  }

  SynthSpec single = spec;
  single.scenes_min = single.scenes_max = 1;
  for (const auto& album : synth_dataset(single).albums)
    for (int g : *album.gold_boundaries) CHECK(g == 0);

  CHECK(synth_dataset(spec).albums == data.albums);
  SynthSpec other = spec;
  other.seed = 2;
  CHECK_FALSE(synth_dataset(other).albums == data.albums);

  SynthSpec bad = spec;
  bad.scenes_min = 5;
  bad.scenes_max = 2;
  CHECK_THROWS_AS(synth_dataset(bad), ConfigError);
}

TEST_CASE("synthetic stories follow the scene templates") {
  SynthSpec spec;
  spec.albums = 4;
  const auto data = synth_dataset(spec);
  for (std::size_t a = 0; a < data.albums.size(); ++a) {
    const auto& clusters = data.photo_clusters[a];
    const auto& gold = *data.albums[a].gold_boundaries;
    std::vector<std::size_t> scene_cluster{clusters[0]};
    for (std::size_t i = 1; i < gold.size(); ++i)
      if (gold[i]) scene_cluster.push_back(clusters[i]);
    const std::size_t scenes = scene_cluster.size();
    for (std::size_t j = 0; j < spec.sentences; ++j)
      CHECK(data.albums[a].stories[0][j] == data.templates[scene_cluster[j * scenes / spec.sentences]]);
  }
}
