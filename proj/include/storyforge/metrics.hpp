// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace storyforge {

using Tokens = std::vector<std::string>;

/// One candidate story and its references, each a flat token list.
struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;
};

inline constexpr std::size_t kMaxNgram = 4;
inline constexpr double kRougeBeta = 1.2;
inline constexpr double kCiderScale = 10.0;

/// Corpus BLEU-1..max_n. Clipping uses the maximum count over references and
/// the brevity penalty uses, per pair, the reference length closest to the
/// candidate (the shorter one on ties). Element n-1 holds BLEU-n.
/// Throws EvaluationError on an empty corpus, a pair without references, or
/// max_n outside 1..4.
std::vector<double> bleu(std::span<const EvalPair> corpus, std::size_t max_n = kMaxNgram);

/// Length of the longest common subsequence.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Mean over pairs of the best LCS F-measure against any reference.
double rouge_l(std::span<const EvalPair> corpus, double beta = kRougeBeta);

/// Consensus score: TF-IDF n-gram cosine similarity for n = 1..4, averaged over
/// references and n, times 10. Document frequencies come from the references
/// of the whole corpus.
double cider(std::span<const EvalPair> corpus);

}  // namespace storyforge
