// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "storyforge/num_array.hpp"

namespace storyforge {

using Mask = std::vector<std::uint8_t>;

double sigmoid(double x);

NumArray relu(const NumArray& x);
NumArray sigmoid(const NumArray& x);
NumArray tanh(const NumArray& x);

/// Softmax restricted to positions where mask is 1; masked positions are exactly 0.
/// Throws InvalidMaskError when no position is valid.
NumArray masked_softmax(const NumArray& logits, std::span<const std::uint8_t> mask);
/// Same, with the mask given as a 0/1 array of the logits' shape.
NumArray masked_softmax(const NumArray& logits, const NumArray& mask);

/// log softmax(logits)[index], computed with the max-shift for stability.
double log_softmax_at(std::span<const double> logits, std::size_t index);

/// y = W x for a row-major W of shape rows x cols.
void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
/// x += Wᵀ g
void matvec_transposed_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> g, std::span<double> x);
/// W += g xᵀ
void outer_add(std::span<const double> g, std::span<const double> x, std::span<double> w);

}  // namespace storyforge
