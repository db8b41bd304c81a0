// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "storyforge/param_store.hpp"

namespace storyforge {

// Binary layout, all integers and doubles little-endian:
//   magic    8 bytes  "SFCKPT\0\0"
//   version  u32      (currently 1)
//   metadata u32 length + UTF-8 bytes (free-form, e.g. a config snapshot)
//   count    u32      number of entries, written in name order
//   entry    u32 name length + name, u32 group length + group,
//            u32 rank, rank x u64 extents, product(extents) x f64 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore params;
  std::string metadata;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::string& metadata = {});
/// Throws FormatError on a bad magic, unsupported version or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace storyforge
