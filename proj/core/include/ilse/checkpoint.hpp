#pragma once

#include <filesystem>
#include <iosfwd>

#include "ilse/param_store.hpp"

namespace ilse {

// Parameter checkpoint, little-endian:
//   "ILSECKPT"  u32 version (= 1)
//   repeated until EOF:
//     u32 name_length, name bytes, u32 rank, u64 dims[rank], f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParamStore& params);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);

// Returns a store holding the values only (gradients/moments zeroed).
// Throws FormatError on malformed input.
ParamStore read_checkpoint(std::istream& in);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace ilse
