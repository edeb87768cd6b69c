#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "fesog/federation.hpp"

namespace fesog {

/// Binary ClientMessage encoding. All integers and floats little-endian.
///
///   u32  magic 0x50475346 ("FSGP")
///   u64  round
///   u32  client id
///   f64  interaction_count
///   u32  tensor count
///   then per tensor:
///     u8   kind   (TensorKind)
///     u32  id     (entity id, or WeightTag for kModelWeight)
///     u32  length (number of f64 entries)
///     f64  entries[length]
///
/// Tensors are written model weights first (tag order), then item
/// gradients, user gradients, item counts and user counts, each in ascending
/// id order. Count tensors have length 1.
enum class TensorKind : std::uint8_t {
  kModelWeight = 0,
  kItemGrad = 1,
  kUserGrad = 2,
  kItemCount = 3,
  kUserCount = 4,
};

inline constexpr std::uint32_t kPacketMagic = 0x50475346;

void write_message(std::ostream& out, const ClientMessage& msg);
ClientMessage read_message(std::istream& in);

std::string encode_message(const ClientMessage& msg);
ClientMessage decode_message(const std::string& bytes);

}  // namespace fesog
