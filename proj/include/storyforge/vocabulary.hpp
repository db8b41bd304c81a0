// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace storyforge {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kSpecialCount = 4;
inline constexpr int kDefaultMinCount = 5;
inline constexpr std::size_t kDefaultMaxWords = 25;

/// Splits text into tokens: ASCII letters are lowercased, every ASCII
/// punctuation character becomes a token of its own, and whitespace separates
/// tokens. Other bytes (including UTF-8 sequences) stay inside words.
std::vector<std::string> tokenize(std::string_view text);

/// Dense token <-> id mapping with fixed special ids PAD=0, BOS=1, EOS=2, UNK=3.
class Vocabulary {
 public:
  /// Keeps tokens that occur at least min_count times, ordered by descending
  /// count and then lexicographically. Throws Error on an empty corpus.
  static Vocabulary build(std::span<const std::vector<std::string>> sentences,
                          int min_count = kDefaultMinCount);

  /// Text file: a header line "#storyforge-vocab min_count=<n> specials=<pad>,<bos>,<eos>,<unk>"
  /// followed by one token per line in id order (specials first).
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  std::size_t size() const { return tokens_.size(); }
  int min_count() const { return min_count_; }
  bool contains(std::string_view token) const;
  /// UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  /// Throws DimensionError when the id is out of range.
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  Vocabulary() = default;
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  int min_count_ = kDefaultMinCount;
};

/// At most max_words content ids followed by EOS.
std::vector<TokenId> encode_sentence(std::span<const std::string> tokens, const Vocabulary& vocab,
                                     std::size_t max_words = kDefaultMaxWords);
/// Token strings up to (excluding) the first EOS.
std::vector<std::string> decode_sentence(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace storyforge
