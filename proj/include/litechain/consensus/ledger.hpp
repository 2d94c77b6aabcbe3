#pragma once

// Hash-chained block ledger with pruning and a line-oriented export format.
//
// Block canonical layout (hashed, then followed by the 32-byte block hash):
//   height u64, kind u8, prev_hash 32B, model_id 32B, proposer u32,
//   cluster u32, round u64,
//   participation u64 count x (device u32, samples u64, verified u8),
//   payload u64 length + bytes, timestamp f64

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain::consensus {

enum class BlockKind : std::uint8_t { genesis = 0, model = 1, fragment = 2, checkpoint = 3 };

std::string to_string(BlockKind k);

struct Participation {
  DeviceId device = 0;
  std::uint64_t samples = 0;
  bool verified = false;

  bool operator==(const Participation&) const = default;
};

struct Block {
  std::uint64_t height = 0;
  BlockKind kind = BlockKind::model;
  Digest prev_hash{};
  Digest model_id{};
  DeviceId proposer = 0;
  ClusterId cluster = 0;
  std::uint64_t round = 0;
  std::vector<Participation> participation;
  std::vector<std::uint8_t> payload;
  double timestamp = 0.0;
  Digest block_hash{};

  std::vector<std::uint8_t> header_bytes() const;
  Digest compute_hash() const;
  void seal() { block_hash = compute_hash(); }
  /// Stored size: canonical layout plus the block hash.
  std::size_t byte_size() const;

  bool operator==(const Block&) const = default;
};

std::vector<std::uint8_t> serialize(const Block& b);
Block deserialize_block(std::span<const std::uint8_t> bytes);

/// Checkpoint payload: latest model id, epoch and the reputation map.
struct Checkpoint {
  Digest latest_model{};
  std::uint64_t epoch = 0;
  std::map<DeviceId, double> reputation;

  std::vector<std::uint8_t> encode() const;
  static Checkpoint decode(std::span<const std::uint8_t> bytes);
};

class Ledger {
 public:
  /// Starts with a genesis block at height 0.
  explicit Ledger(double genesis_time = 0.0);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& tip() const { return blocks_.back(); }
  /// prev_hash expected of the first live block.
  const Digest& anchor() const { return anchor_; }

  /// Link, number and seal `b`, then append. Returns the sealed block.
  const Block& append(Block b);

  /// True if `id` was ever committed as a model block, pruned or not.
  bool has_model(const Digest& id) const { return spent_.contains(id); }
  /// Live model blocks sharing an id with an earlier live model block.
  std::vector<std::uint64_t> duplicate_model_heights() const;

  /// Drop every block with height < `height`; the chain stays verifiable
  /// through the stored anchor.
  std::size_t prune_below(std::uint64_t height);

  std::size_t live_bytes() const;
  std::size_t written_bytes() const { return written_; }

  /// Height of the first block whose link or hash fails, if any.
  std::optional<std::uint64_t> verify() const;

  std::map<DeviceId, double> reputation;
  std::uint64_t epoch = 0;

  /// Header line then one block per line; see the README for fields.
  void export_text(std::ostream& out) const;
  /// Parse an export. Throws on malformed lines; the message names the height.
  static Ledger import_text(std::istream& in);

 private:
  Ledger(std::vector<Block> blocks, Digest anchor);

  std::vector<Block> blocks_;
  Digest anchor_{};
  std::set<Digest> spent_;
  std::size_t written_ = 0;
};

}  // namespace litechain::consensus
