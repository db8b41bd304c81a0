// SPDX-License-Identifier: Apache-2.0
#include "storyforge/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "storyforge/errors.hpp"

namespace storyforge {

namespace {

constexpr const char* kSpecialTokens[kSpecialCount] = {"<pad>", "<bos>", "<eos>", "<unk>"};
constexpr std::string_view kHeaderTag = "#storyforge-vocab";

std::string specials_list() {
  std::string out;
  for (std::size_t i = 0; i < kSpecialCount; ++i) {
    if (i) out += ',';
    out += kSpecialTokens[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current += c < 0x80 ? static_cast<char>(std::tolower(c)) : ch;
    }
  }
  flush();
  return out;
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> sentences, int min_count) {
  if (min_count < 1) throw ConfigError("vocabulary: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sentence : sentences)
    for (const auto& token : sentence) {
      ++counts[token];
      ++total;
    }
  if (total == 0) throw Error("vocabulary: empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : counts)
    if (count >= static_cast<std::size_t>(min_count)) kept.emplace_back(token, count);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.min_count_ = min_count;
  for (const char* special : kSpecialTokens) vocab.add(special);
  for (auto& [token, _] : kept) vocab.add(token);
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("vocabulary: cannot write " + path.string());
  out << kHeaderTag << " min_count=" << min_count_ << " specials=" << specials_list() << '\n';
  for (const auto& token : tokens_) out << token << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("vocabulary: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("vocabulary: missing header", 1);
  std::istringstream header(line);
  std::string tag, min_field, specials_field;
  header >> tag >> min_field >> specials_field;
  if (tag != kHeaderTag || min_field.rfind("min_count=", 0) != 0 ||
      specials_field != "specials=" + specials_list())
    throw FormatError("vocabulary: bad header '" + line + "'", 1);

  Vocabulary vocab;
  try {
    vocab.min_count_ = std::stoi(min_field.substr(10));
  } catch (const std::exception&) {
    throw FormatError("vocabulary: bad min_count in header", 1);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw FormatError("vocabulary: empty token", line_no);
    if (vocab.ids_.count(line)) throw FormatError("vocabulary: duplicate token '" + line + "'", line_no);
    const std::size_t id = vocab.tokens_.size();
    if (id < kSpecialCount && line != kSpecialTokens[id])
      throw FormatError("vocabulary: special token " + std::to_string(id) + " must be " +
                            kSpecialTokens[id],
                        line_no);
    vocab.add(line);
  }
  if (vocab.size() < kSpecialCount) throw FormatError("vocabulary: missing special tokens", line_no);
  return vocab;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DimensionError("vocabulary: token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> encode_sentence(std::span<const std::string> tokens, const Vocabulary& vocab,
                                     std::size_t max_words) {
  std::vector<TokenId> ids;
  const std::size_t n = std::min(tokens.size(), max_words);
  ids.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(kEos);
  return ids;
}

std::vector<std::string> decode_sentence(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace storyforge
