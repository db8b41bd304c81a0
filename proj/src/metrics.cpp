// SPDX-License-Identifier: Apache-2.0
#include "storyforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "storyforge/errors.hpp"

namespace storyforge {
namespace {

using Ngram = std::vector<std::string>;
using Counts = std::map<Ngram, double>;

Counts ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  Counts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  return counts;
}

void check_corpus(std::span<const EvalPair> corpus, const char* metric) {
  if (corpus.empty()) throw EvaluationError(std::string(metric) + ": empty corpus");
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].references.empty())
      throw EvaluationError(std::string(metric) + ": pair " + std::to_string(i) + " has no references");
}

}  // namespace

std::vector<double> bleu(std::span<const EvalPair> corpus, std::size_t max_n) {
  check_corpus(corpus, "bleu");
  if (max_n < 1 || max_n > kMaxNgram) throw EvaluationError("bleu: max_n must be in 1..4");

  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (const auto& pair : corpus) {
    const std::size_t c = pair.candidate.size();
    cand_len += static_cast<double>(c);
    std::size_t best = pair.references.front().size();
    for (const auto& ref : pair.references) {
      const auto d = [c](std::size_t r) { return r > c ? r - c : c - r; };
      if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best)) best = ref.size();
    }
    ref_len += static_cast<double>(best);

    for (std::size_t n = 1; n <= max_n; ++n) {
      Counts max_ref;
      for (const auto& ref : pair.references)
        for (const auto& [gram, count] : ngram_counts(ref, n)) max_ref[gram] = std::max(max_ref[gram], count);
      for (const auto& [gram, count] : ngram_counts(pair.candidate, n)) {
        total[n - 1] += count;
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  const double bp = cand_len == 0.0 ? 0.0 : (cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len));
  std::vector<double> scores(max_n, 0.0);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (matched[n - 1] == 0.0 || total[n - 1] == 0.0) zero = true;
    if (!zero) log_sum += std::log(matched[n - 1] / total[n - 1]);
    scores[n - 1] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(n));
  }
  return scores;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const EvalPair> corpus, double beta) {
  check_corpus(corpus, "rouge_l");
  double sum = 0.0;
  for (const auto& pair : corpus) {
    double best = 0.0;
    for (const auto& ref : pair.references) {
      const auto lcs = static_cast<double>(lcs_length(pair.candidate, ref));
      if (lcs == 0.0) continue;
      const double p = lcs / static_cast<double>(pair.candidate.size());
      const double r = lcs / static_cast<double>(ref.size());
      const double f = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

double cider(std::span<const EvalPair> corpus) {
  check_corpus(corpus, "cider");

  // document frequency: number of pairs whose references contain the n-gram
  std::vector<std::map<Ngram, double>> df(kMaxNgram);
  for (const auto& pair : corpus) {
    for (std::size_t n = 1; n <= kMaxNgram; ++n) {
      std::set<Ngram> seen;
      for (const auto& ref : pair.references)
        for (const auto& entry : ngram_counts(ref, n)) seen.insert(entry.first);
      for (const auto& gram : seen) df[n - 1][gram] += 1.0;
    }
  }
  // log(N) vanishes for a single pair, which would zero every weight
  const double log_docs = corpus.size() > 1 ? std::log(static_cast<double>(corpus.size())) : 1.0;

  const auto weigh = [&](const Counts& counts, std::size_t n, double& norm) {
    Counts vec;
    norm = 0.0;
    for (const auto& [gram, tf] : counts) {
      const auto it = df[n - 1].find(gram);
      const double d = it == df[n - 1].end() ? 0.0 : it->second;
      const double w = tf * (log_docs - std::log(std::max(1.0, d)));
      vec[gram] = w;
      norm += w * w;
    }
    norm = std::sqrt(norm);
    return vec;
  };

  double sum = 0.0;
  for (const auto& pair : corpus) {
    double pair_score = 0.0;
    for (std::size_t n = 1; n <= kMaxNgram; ++n) {
      double cand_norm = 0.0;
      const Counts cand = weigh(ngram_counts(pair.candidate, n), n, cand_norm);
      double per_n = 0.0;
      for (const auto& ref : pair.references) {
        double ref_norm = 0.0;
        const Counts rvec = weigh(ngram_counts(ref, n), n, ref_norm);
        if (cand_norm == 0.0 || ref_norm == 0.0) continue;
        double dot = 0.0;
        for (const auto& [gram, w] : cand) {
          const auto it = rvec.find(gram);
          if (it != rvec.end()) dot += w * it->second;
        }
        per_n += dot / (cand_norm * ref_norm);
      }
      pair_score += per_n / static_cast<double>(pair.references.size());
    }
    sum += kCiderScale * pair_score / static_cast<double>(kMaxNgram);
  }
  return sum / static_cast<double>(corpus.size());
}

}  // namespace storyforge
