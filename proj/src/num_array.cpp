// SPDX-License-Identifier: Apache-2.0
#include "storyforge/num_array.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "storyforge/errors.hpp"

namespace storyforge {

Shape::Shape(std::initializer_list<std::size_t> extents) : rank_(extents.size()) {
  if (rank_ > kMaxRank) throw DimensionError("Shape: rank " + std::to_string(rank_) + " exceeds the maximum of 4");
  std::copy(extents.begin(), extents.end(), extents_.begin());
}

Shape::Shape(std::size_t rank) : rank_(rank) {
  if (rank_ > kMaxRank) throw DimensionError("Shape: rank " + std::to_string(rank_) + " exceeds the maximum of 4");
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

NumArray::NumArray(Shape shape) : shape_(std::move(shape)) {
  if (std::find(shape_.begin(), shape_.end(), 0) != shape_.end())
    throw DimensionError("NumArray: zero extent in shape " + shape_string(shape_));
  data_.assign(shape_size(shape_), 0.0);
}

NumArray::NumArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::find(shape_.begin(), shape_.end(), 0) != shape_.end())
    throw DimensionError("NumArray: zero extent in shape " + shape_string(shape_));
  if (data_.size() != shape_size(shape_))
    throw DimensionError("NumArray: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
}

NumArray NumArray::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return NumArray(Shape{n}, std::move(data));
}

NumArray NumArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return NumArray(Shape{rows, cols}, std::move(data));
}

std::span<double> NumArray::grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

std::span<const double> NumArray::grad() const {
  if (!grad_) return {};
  return *grad_;
}

void NumArray::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

}  // namespace storyforge
