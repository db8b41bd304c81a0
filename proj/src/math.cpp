// SPDX-License-Identifier: Apache-2.0
#include "storyforge/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "storyforge/errors.hpp"

namespace storyforge {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

template <typename F>
NumArray map(const NumArray& x, F f) {
  NumArray out = x;
  out.drop_grad();
  for (auto& v : out.data()) v = f(v);
  return out;
}

}  // namespace

NumArray relu(const NumArray& x) {
  return map(x, [](double v) { return v > 0 ? v : 0.0; });
}

NumArray sigmoid(const NumArray& x) {
  return map(x, [](double v) { return sigmoid(v); });
}

NumArray tanh(const NumArray& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

NumArray masked_softmax(const NumArray& logits, std::span<const std::uint8_t> mask) {
  if (mask.size() != logits.size())
    throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                         " != logits length " + std::to_string(logits.size()));
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    top = std::max(top, logits[i]);
  }
  if (!any) throw InvalidMaskError("masked_softmax: mask has no valid position");
  NumArray out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i] /= total;
  return out;
}

NumArray masked_softmax(const NumArray& logits, const NumArray& mask) {
  if (mask.shape() != logits.shape())
    throw DimensionError("masked_softmax: mask shape " + shape_string(mask.shape()) +
                         " != logits shape " + shape_string(logits.shape()));
  Mask flags(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0)
      throw InvalidMaskError("masked_softmax: mask entries must be 0 or 1");
    flags[i] = mask[i] != 0.0;
  }
  return masked_softmax(logits, flags);
}

double log_softmax_at(std::span<const double> logits, std::size_t index) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  return logits[index] - top - std::log(total);
}

void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  const double* xs = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    // four independent partial sums; the order is fixed, so results stay reproducible
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      a0 += row[c] * xs[c];
      a1 += row[c + 1] * xs[c + 1];
      a2 += row[c + 2] * xs[c + 2];
      a3 += row[c + 3] * xs[c + 3];
    }
    for (; c < cols; ++c) a0 += row[c] * xs[c];
    y[r] = (a0 + a1) + (a2 + a3);
  }
}

void matvec_transposed_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> g, std::span<double> x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * gr;
  }
}

void outer_add(std::span<const double> g, std::span<const double> x, std::span<double> w) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < g.size(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace storyforge
