#pragma once

#include <string>

#include "url/tensor.hpp"

namespace url {

// Binary checkpoint layout (all integers little-endian):
//   magic "URLM" (4 bytes)
//   format version, uint32
//   tensor count, uint64
//   per tensor, in name order:
//     name length (uint64), name bytes (UTF-8)
//     rank (uint64), dims (uint64 each)
//     values (IEEE-754 binary64 each)
// A save -> load round trip is bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamStore& store);
ParamStore load_checkpoint(const std::string& path);

}  // namespace url
