// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "storyforge/checkpoint.hpp"
#include "storyforge/model_config.hpp"

namespace storyforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (without the program name) and returns the exit code:
/// 0 success, 1 usage or configuration error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Checkpoint metadata is a JSON object holding at least the model config.
std::string checkpoint_metadata(const ModelConfig& model, const nlohmann::json& extra = nlohmann::json::object());
ModelConfig checkpoint_model(const Checkpoint& checkpoint);

}  // namespace storyforge
