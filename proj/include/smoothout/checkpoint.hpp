#pragma once

// Binary checkpoint:
//   "SMO1"
//   u32 segment count
//   per segment: u32 layer id, u8 role, u8 rank, u32 x rank dims
//   raw f64 parameter buffer
// All integers and floats little-endian.

#include <filesystem>
#include <iosfwd>

#include "smoothout/nn.hpp"

namespace smoothout {

void write_checkpoint(std::ostream& out, const ParamVector& params);
ParamVector read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params);
ParamVector load_checkpoint(const std::filesystem::path& path);

}  // namespace smoothout
