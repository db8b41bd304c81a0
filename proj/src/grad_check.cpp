// SPDX-License-Identifier: Apache-2.0
#include "storyforge/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "storyforge/errors.hpp"

namespace storyforge {

namespace {

double checked(double v, const char* where) {
  if (!std::isfinite(v)) throw EvaluationError(std::string("grad_check: non-finite objective ") + where);
  return v;
}

}  // namespace

GradCheckReport grad_check(const ValueFn& value, const GradientFn& gradient, ParamStore& params,
                           double delta) {
  checked(value(params), "at the base point");
  for (auto& [_, entry] : params.entries()) {
    entry.drop_grad();
    entry.grad();
  }
  gradient(params);

  std::map<std::string, std::vector<double>> analytic;
  for (auto& [name, entry] : params.entries()) {
    auto g = std::as_const(entry).grad();
    analytic[name].assign(g.begin(), g.end());
  }

  GradCheckReport report;
  bool first = true;
  for (auto& [name, entry] : params.entries()) {
    const auto& a = analytic[name];
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < entry.size(); ++i) {
      const double saved = entry[i];
      entry[i] = saved + delta;
      const double plus = checked(value(params), "at +delta");
      entry[i] = saved - delta;
      const double minus = checked(value(params), "at -delta");
      entry[i] = saved;
      const double numeric = (plus - minus) / (2.0 * delta);
      diff2 += (a[i] - numeric) * (a[i] - numeric);
      a2 += a[i] * a[i];
      n2 += numeric * numeric;

      const double err = std::abs(a[i] - numeric) / std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
      ++report.coordinates;
      if (report.worst_coordinate_param.empty() || err > report.max_coordinate_error) {
        report.max_coordinate_error = err;
        report.worst_coordinate_param = name;
        report.worst_index = i;
        report.worst_analytic = a[i];
        report.worst_numeric = numeric;
      }
    }
    const double err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
    if (first || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_param = name;
      first = false;
    }
  }
  return report;
}

double evaluate_with_gradient(const GraphFn& graph, ParamStore& params) {
  Tape tape;
  Var loss = graph(Binder(tape, params));
  tape.backward(loss);
  return loss.scalar();
}

GradCheckReport grad_check(const GraphFn& graph, ParamStore& params, double delta) {
  ValueFn value = [&graph](ParamStore& p) {
    Tape tape;
    return graph(Binder(tape, std::as_const(p))).scalar();
  };
  GradientFn gradient = [&graph](ParamStore& p) { evaluate_with_gradient(graph, p); };
  return grad_check(value, gradient, params, delta);
}

}  // namespace storyforge
