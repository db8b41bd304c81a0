// SPDX-License-Identifier: Apache-2.0
#include "storyforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "storyforge/errors.hpp"

namespace storyforge {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(char* dst, std::size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n)))
      throw FormatError("checkpoint: truncated file", 0);
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, metadata);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, value] : params.entries()) {
    put_string(out, name);
    put_string(out, params.group_of(name));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t extent : value.shape()) put<std::uint64_t>(out, extent);
    out.write(reinterpret_cast<const char*>(value.data().data()),
              static_cast<std::streamsize>(value.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  Reader reader(in);
  char magic[8];
  reader.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string(), 0);
  const auto version = reader.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version), 0);

  Checkpoint ckpt;
  ckpt.metadata = reader.get_string();
  const auto count = reader.get<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = reader.get_string();
    std::string group = reader.get_string();
    const auto rank = reader.get<std::uint32_t>();
    if (rank == 0 || rank > Shape::kMaxRank) throw FormatError("checkpoint: bad rank for " + name, 0);
    Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(reader.get<std::uint64_t>());
    std::vector<double> data(shape_size(shape));
    reader.read(reinterpret_cast<char*>(data.data()), data.size() * sizeof(double));
    ckpt.params.add(name, group, NumArray(std::move(shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace storyforge
