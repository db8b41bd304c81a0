// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "storyforge/param_store.hpp"
#include "storyforge/tape.hpp"

namespace storyforge {

struct GradCheckReport {
  /// max over parameters of ‖a − n‖ / max(‖a‖, ‖n‖, 1e-8), where a and n are
  /// the analytic and central-difference gradients of one named entry.
  double max_relative_error = 0.0;
  std::string worst_param;
  /// The same ratio taken per coordinate, for diagnosis. Coordinates whose
  /// gradient is within a few orders of the objective's rounding noise / δ
  /// dominate this figure.
  double max_coordinate_error = 0.0;
  std::string worst_coordinate_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Scalar objective evaluated at the store's current values.
using ValueFn = std::function<double(ParamStore&)>;
/// Writes the analytic gradient into the store's grad slots (which start zeroed).
using GradientFn = std::function<void(ParamStore&)>;
/// Records a scalar objective through a binder. The binder is read-only while
/// differencing, so no backward closures are kept there.
using GraphFn = std::function<Var(const Binder&)>;

/// Compares analytic gradients with central differences over every coordinate
/// of every entry. Values are restored afterwards. Throws EvaluationError when
/// the objective is non-finite.
GradCheckReport grad_check(const ValueFn& value, const GradientFn& gradient, ParamStore& params,
                           double delta = 1e-5);

/// Same, with both the value and the analytic gradient taken from one graph.
GradCheckReport grad_check(const GraphFn& graph, ParamStore& params, double delta = 1e-5);

/// Evaluates a graph objective and back-propagates into the store's grad slots.
double evaluate_with_gradient(const GraphFn& graph, ParamStore& params);

}  // namespace storyforge
