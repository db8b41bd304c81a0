// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "storyforge/param_store.hpp"

namespace storyforge {

struct AdamConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment state is kept per parameter name and
/// carried across calls; entries of frozen groups are skipped entirely
/// (neither the values nor the moments are touched).
class Adam {
 public:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the grad slots of every non-frozen entry.
  /// An entry without a grad slot counts as a zero gradient. All gradients are
  /// validated before any value changes; a non-finite one throws
  /// NonFiniteGradientError naming the parameter.
  void step(ParamStore& params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace storyforge
