#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace molvae {

// One entry of the "RGCV" v1 checkpoint container. dtype codes:
// 0 = f32, 1 = f64, 2 = u64.
struct CheckpointEntry {
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint64_t>> payload;

  int dtype() const { return static_cast<int>(payload.index()); }
  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

// Binary layout: magic "RGCV", u32 version, u32 entry count; per entry
// u32 key length, key bytes, u8 dtype, u8 rank, rank x u64 dims, payload.
// All integers and floats little-endian.
void save_checkpoint(const std::string& path, const Checkpoint& entries);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace molvae
