#pragma once

// Canonical byte layouts.
//
// All integers are little-endian, all reals are IEEE-754 binary64 written
// little-endian, all variable-length sequences carry a u64 element count.
//
// ModelUpdate layout (identifier reproducibility depends on the first item):
//   weights      u64 count, count x f64     <- hashed by canonical_hash()
//   owner        u32
//   round        u64
//   local_steps  u32
//   identifier   32 bytes
//   signature    u8 (0 or 1)

#include <cstdint>
#include <span>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain {

/// SHA-256 over the length-prefixed little-endian f64 serialization of
/// `weights`. Throws on an empty vector or on any non-finite element.
Digest canonical_hash(std::span<const double> weights);

std::vector<std::uint8_t> serialize_weights(std::span<const double> weights);

std::vector<std::uint8_t> serialize(const ModelUpdate& u);
std::vector<std::uint8_t> serialize(const Device& d);
std::vector<std::uint8_t> serialize(const Partition& p);

ModelUpdate deserialize_model_update(std::span<const std::uint8_t> bytes);
Device deserialize_device(std::span<const std::uint8_t> bytes);
Partition deserialize_partition(std::span<const std::uint8_t> bytes);

}  // namespace litechain
