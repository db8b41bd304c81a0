// SPDX-License-Identifier: Apache-2.0
#include "storyforge/adam.hpp"

#include <cmath>

#include "storyforge/errors.hpp"

namespace storyforge {

void Adam::step(ParamStore& params) {
  for (const auto& [name, value] : params.entries()) {
    if (params.is_frozen(name) || !value.has_grad()) continue;
    for (double g : value.grad())
      if (!std::isfinite(g)) throw NonFiniteGradientError(name);
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);

  for (auto& [name, value] : params.entries()) {
    if (params.is_frozen(name)) continue;
    Moments& m = moments_[name];
    if (m.first.empty()) {
      m.first.assign(value.size(), 0.0);
      m.second.assign(value.size(), 0.0);
    }
    if (!value.has_grad()) {
      // Zero gradient: moments decay and the update uses the decayed moments.
      for (std::size_t i = 0; i < value.size(); ++i) {
        m.first[i] *= config_.beta1;
        m.second[i] *= config_.beta2;
        const double mhat = m.first[i] / correction1;
        const double vhat = m.second[i] / correction2;
        value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      }
      continue;
    }
    auto grad = std::as_const(value).grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g;
      m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m.first[i] / correction1;
      const double vhat = m.second[i] / correction2;
      value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace storyforge
