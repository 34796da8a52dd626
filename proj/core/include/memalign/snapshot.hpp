#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "memalign/memory_bank.hpp"

namespace memalign {

// .membank layout, all integers and floats little-endian:
//
//   0   char[8]  magic "MEMBANK\0"
//   8   u32      format version (1)
//   12  u32      categories C
//   16  u32      feature dimension d
//   20  u8       storage variant (0 imbalanced, 1 balanced)
//   21  f64      gamma
//   29  u64      build generation
//   37  C x (u64 capacity, u64 count)
//   ..  f64 payload, category-major, count x d values per category
//
// Nothing may follow the payload.
inline constexpr std::uint32_t kSnapshotVersion = 1;

std::vector<std::uint8_t> snapshot(const MemoryBank& bank);

/// Throws FormatError with the failing byte offset.
MemoryBank load_snapshot(std::span<const std::uint8_t> bytes);

/// Writes via a temporary file and rename.
void write_snapshot_file(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank read_snapshot_file(const std::filesystem::path& path);

}  // namespace memalign
