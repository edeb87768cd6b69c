#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "fesog/model.hpp"

namespace fesog {

/// Checkpoint layout, little-endian:
///
///   char[8] magic "FESOGCKP"
///   u32     format version (1)
///   u64     round index
///   u32     d
///   u8      share_gat_layers
///   u8      use_relation_vectors
///   u32     tensor count (11)
///   then per tensor:
///     u16   name length, name bytes (ASCII)
///     u64   rows, u64 cols
///     f64   entries[rows * cols], row-major
///
/// Tensors in order: user_embedding (N x d), item_embedding (M x d), then
/// the model weights in WeightTag order; vectors are stored as 1 x n.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParameterSet params;
  std::uint64_t round = 0;
};

void write_checkpoint(std::ostream& out, const ParameterSet& params, std::uint64_t round);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     std::uint64_t round);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fesog
