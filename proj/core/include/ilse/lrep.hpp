#pragma once

#include <filesystem>
#include <iosfwd>

#include "ilse/dataset.hpp"

namespace ilse {

// LREP layer-stack dataset file, little-endian:
//   "LREP"  u32 version (= 1)  u8 task kind (0 classification, 1 pair)
//   u32 L  u32 d  u32 K (0 for pairs)  u64 N
//   N examples:
//     classification: L*d f32, u32 label, u8 split
//     pair:           2*L*d f32 (first, then second stack), f32 gold, u8 split
// Split tags: 0 train, 1 validation, 2 test. Values are stored as f32 and
// held as f64 in memory.
inline constexpr std::uint32_t kLrepVersion = 1;

void write_lrep(std::ostream& out, const TaskDataset& dataset);
void write_lrep(const std::filesystem::path& path, const TaskDataset& dataset);

// Throws FormatError (with byte offset) on bad magic, version, task kind,
// split tag, label, non-finite value or truncated payload.
TaskDataset read_lrep(std::istream& in);
TaskDataset read_lrep(const std::filesystem::path& path);

}  // namespace ilse
