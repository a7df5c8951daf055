#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "skeletor/tensor.hpp"

namespace skeletor {

// Binary parameter file, all integers little-endian:
//
//   magic     8 bytes  "SKLTCKPT"
//   version   u32      (currently 1)
//   meta_len  u32      followed by meta_len bytes of UTF-8 JSON (model config)
//   count     u64      number of parameter records
//   record*:  name_len u32, name bytes, rank u32, dims u64 * rank,
//             data f64 * prod(dims) (IEEE-754 binary64, little-endian)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::string metadata_json;
  std::vector<NamedTensor> parameters;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace skeletor
