// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"
#include "storyforge/album.hpp"
#include "storyforge/checkpoint.hpp"
#include "storyforge/cli.hpp"

using namespace storyforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "storyforge_test_cli") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

const std::vector<std::string> kTiny = {"--photo-hidden", "3", "--attn-hidden", "4", "--dec-hidden", "4",
                                        "--embed-dim",    "4", "--max-photos",  "12"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"train", "--no-such-flag", "1"}).code == kExitUsage);
  CHECK(cli({"train", "--stage", "3", "--train", "x", "--vocab", "y", "--out-dir", "z"}).code != kExitOk);
  const auto help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("inspect-scenes") != std::string::npos);
}

TEST_CASE("pipeline through the command line") {
  Workspace ws;
  REQUIRE(cli({"synth-data", "--output", ws / "train.jsonl", "--albums", "3", "--synth-feature-dim", "5"}).code ==
          kExitOk);
  CHECK(fs::exists(ws / "train.jsonl.cfg"));
  REQUIRE(cli({"build-vocab", "--train", ws / "train.jsonl", "--vocab", ws / "vocab.txt", "--min-count", "1"}).code ==
          kExitOk);

  SUBCASE("untrained checkpoint") {
    const auto r = cli(with({"train", "--stage", "1", "--max-steps", "0", "--train", ws / "train.jsonl", "--vocab",
                             ws / "vocab.txt", "--out-dir", ws / "run0"},
                            kTiny));
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(ws / "run0/model.ckpt"));
    const auto ckpt = load_checkpoint(ws / "run0/model.ckpt");
    CHECK(checkpoint_model(ckpt).feature_dim == 5);
  }

  SUBCASE("same seed, same artifacts") {
    const auto args = [&](const std::string& out) {
      return with({"train", "--stage", "all", "--max-steps", "4", "--validate-every", "2", "--lambda", "0.2", "--mu",
                   "0.8", "--train", ws / "train.jsonl", "--val", ws / "train.jsonl", "--vocab", ws / "vocab.txt",
                   "--out-dir", ws / out},
                  kTiny);
    };
    REQUIRE(cli(args("a")).code == kExitOk);
    REQUIRE(cli(args("b")).code == kExitOk);
    auto la = lines(slurp(ws / "a/train.log")), lb = lines(slurp(ws / "b/train.log"));
    REQUIRE(la.size() == 9);
    CHECK(nlohmann::json::parse(la[0])["config"]["lambda"] == 0.2);
    la.erase(la.begin());
    lb.erase(lb.begin());
    CHECK(la == lb);
    CHECK(slurp(ws / "a/model.ckpt") == slurp(ws / "b/model.ckpt"));
    CHECK(slurp(ws / "a/stage1.ckpt") == slurp(ws / "b/stage1.ckpt"));
    CHECK(slurp(ws / "a/run.cfg") == slurp(ws / "b/run.cfg").replace(slurp(ws / "b/run.cfg").find("/b"), 2, "/a"));

    const auto gen = cli({"generate", "--checkpoint", ws / "a/model.ckpt", "--vocab", ws / "vocab.txt", "--data",
                          ws / "train.jsonl", "--output", ws / "gen.jsonl"});
    CHECK(gen.code == kExitOk);
    const auto records = lines(slurp(ws / "gen.jsonl"));
    REQUIRE(records.size() == 3);
    const auto first = nlohmann::json::parse(records[0]);
    CHECK(first["sentences"].size() == 5);
    CHECK(first["alpha"].size() == 5);
    CHECK(first.contains("flags"));

    const auto scored = cli({"evaluate", "--data", ws / "train.jsonl", "--candidates", ws / "gen.jsonl"});
    CHECK(scored.code == kExitOk);
    const auto direct = cli({"evaluate", "--data", ws / "train.jsonl", "--checkpoint", ws / "a/model.ckpt", "--vocab",
                             ws / "vocab.txt"});
    CHECK(direct.out == scored.out);

    const auto stage2 = cli(with({"train", "--stage", "2", "--max-steps", "2", "--init-checkpoint",
                                  ws / "a/stage1.ckpt", "--train", ws / "train.jsonl", "--vocab", ws / "vocab.txt",
                                  "--out-dir", ws / "s2"},
                                 kTiny));
    CHECK(stage2.code == kExitOk);
    const auto mismatch = cli({"train", "--stage", "2", "--init-checkpoint", ws / "a/stage1.ckpt", "--train",
                               ws / "train.jsonl", "--vocab", ws / "vocab.txt", "--out-dir", ws / "s3"});
    CHECK(mismatch.code == kExitUsage);
  }

  SUBCASE("stage 2 needs a checkpoint") {
    CHECK(cli({"train", "--stage", "2", "--train", ws / "train.jsonl", "--vocab", ws / "vocab.txt", "--out-dir",
               ws / "r"})
              .code == kExitUsage);
  }

  SUBCASE("missing checkpoint") {
    CHECK(cli({"generate", "--checkpoint", ws / "none.ckpt", "--vocab", ws / "vocab.txt", "--data",
               ws / "train.jsonl"})
              .code == kExitRuntime);
  }
}

TEST_CASE("evaluate a corpus against itself") {
  Workspace ws;
  REQUIRE(cli({"synth-data", "--output", ws / "d.jsonl", "--albums", "4"}).code == kExitOk);
  std::ofstream cand(ws / "c.jsonl");
  for (const auto& r : read_album_records(ws / "d.jsonl"))
    cand << nlohmann::json{{"album_id", r.album_id}, {"sentences", r.stories[0]}}.dump() << "\n";
  cand.close();
  const auto r = cli({"evaluate", "--data", ws / "d.jsonl", "--candidates", ws / "c.jsonl"});
  CHECK(r.code == kExitOk);
  CHECK(lines(r.out).at(0) == "BLEU-1 1.0000 4");
  CHECK(lines(r.out).at(4) == "ROUGE-L 1.0000 4");
}

TEST_CASE("inspect-scenes prints the detector's flags") {
  Workspace ws;
  REQUIRE(cli({"synth-data", "--output", ws / "d.jsonl", "--albums", "6", "--synth-feature-dim", "4", "--noise", "0",
               "--seed", "5"})
              .code == kExitOk);
  const auto config = oracle::detector_config(4);
  save_checkpoint(ws / "det.ckpt", oracle::detector_params(config), checkpoint_metadata(config));
  const auto r = cli({"inspect-scenes", "--checkpoint", ws / "det.ckpt", "--data", ws / "d.jsonl"});
  REQUIRE(r.code == kExitOk);
  std::map<std::string, std::vector<int>> printed;
  const auto out = lines(r.out);
  CHECK(out.at(0) == "album_id\tphoto\tflag\tsoft\tscene");
  for (std::size_t i = 1; i < out.size(); ++i) {
    std::istringstream row(out[i]);
    std::string id;
    int photo, flag;
    row >> id >> photo >> flag;
    printed[id].push_back(flag);
  }
  for (const auto& rec : read_album_records(ws / "d.jsonl")) CHECK(printed[rec.album_id] == *rec.gold_boundaries);
}

TEST_CASE("config files and precedence") {
  Workspace ws;
  std::ofstream(ws / "s.cfg") << "# synthetic\nalbums = 2\nsynth_feature_dim = 3\n";
  REQUIRE(cli({"synth-data", "--config", ws / "s.cfg", "--output", ws / "d.jsonl"}).code == kExitOk);
  auto recs = read_album_records(ws / "d.jsonl");
  CHECK(recs.size() == 2);
  CHECK(recs[0].features[0].size() == 3);
  REQUIRE(cli({"synth-data", "--config", ws / "s.cfg", "--albums", "5", "--output", ws / "e.jsonl"}).code == kExitOk);
  CHECK(read_album_records(ws / "e.jsonl").size() == 5);
  CHECK(slurp(ws / "e.jsonl.cfg").find("albums = 5") != std::string::npos);

  std::ofstream(ws / "bad.cfg") << "albums = 2\nthis line is wrong\n";
  const auto bad = cli({"synth-data", "--config", ws / "bad.cfg", "--output", ws / "f.jsonl"});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("line 2") != std::string::npos);
  std::ofstream(ws / "unknown.cfg") << "colour = blue\n";
  CHECK(cli({"synth-data", "--config", ws / "unknown.cfg", "--output", ws / "g.jsonl"}).code == kExitUsage);
}

TEST_CASE("grad-check command") {
  const auto r = cli({"grad-check", "--seeds", "1", "--seed", "3"});
  CHECK(r.code == kExitOk);
  CHECK(lines(r.out).back().rfind("PASS", 0) == 0);
  const auto strict = cli({"grad-check", "--seeds", "1", "--threshold", "0"});
  CHECK(strict.code == kExitRuntime);
}
