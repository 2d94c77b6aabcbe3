#pragma once

// Replay attackers, label-flipping poisoners and forced no-voters.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "litechain/core/rng.hpp"
#include "litechain/core/types.hpp"

namespace litechain::adversary {

enum class AttackKind : std::uint8_t { none, replay, label_flip, committee_vote_no };

std::string to_string(AttackKind k);
AttackKind attack_kind_from(const std::string& s);

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  double attacker_rate = 0.0;
  double replay_rate = 0.5;
  /// Empty means (label + 1) mod L.
  std::vector<std::uint32_t> flip_map;
  std::uint64_t seed = 0;

  void validate(std::uint32_t classes) const;
  std::vector<std::uint32_t> resolved_flip_map(std::uint32_t classes) const;
};

std::vector<std::uint32_t> default_flip_map(std::uint32_t classes);

/// round(rate * N) attackers drawn uniformly without replacement, using only
/// `rng` (the attack stream).
std::set<DeviceId> select_attackers(std::span<const DeviceId> ids, double rate, Rng& rng);

/// Labels remapped through `flip_map`; features untouched.
DatasetShard apply_poison(const DatasetShard& shard, std::span<const std::uint32_t> flip_map);

/// With probability replay_rate and a non-empty history, the oldest past
/// update verbatim; otherwise `fresh`. Always consumes one draw.
const ModelUpdate& maybe_replay(const ModelUpdate& fresh, std::span<const ModelUpdate> history,
                                double replay_rate, Rng& rng);

}  // namespace litechain::adversary
