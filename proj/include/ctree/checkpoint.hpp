#pragma once

#include <filesystem>
#include <iosfwd>

#include "ctree/model.hpp"

namespace ctree {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   magic       8 bytes  "CTREECKP"
//   version     u32      kCheckpointVersion
//   header_len  u32, then header_len bytes of "key=value\n" lines holding the
//               ModelConfig fields and vocabulary checksums
//   count       u32      number of tensors
//   per tensor: u32 name_len, name bytes, u32 rank, rank x u64 dims,
//               prod(dims) x f64 values in row-major order
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, std::ostream& out);
void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Throws ConfigError for malformed files or tensors that do not match the
// configuration stored in the header.
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ctree
