#include "litechain/adversary/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace litechain::adversary {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::replay: return "replay";
    case AttackKind::label_flip: return "label_flip";
    case AttackKind::committee_vote_no: return "committee_vote_no";
  }
  return "unknown";
}

AttackKind attack_kind_from(const std::string& s) {
  for (auto k : {AttackKind::none, AttackKind::replay, AttackKind::label_flip, AttackKind::committee_vote_no}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown attack kind '" + s + "'");
}

std::vector<std::uint32_t> default_flip_map(std::uint32_t classes) {
  std::vector<std::uint32_t> m(classes);
  for (std::uint32_t l = 0; l < classes; ++l) m[l] = (l + 1) % classes;
  return m;
}

void AttackConfig::validate(std::uint32_t classes) const {
  if (!(attacker_rate >= 0.0 && attacker_rate <= 1.0)) throw Error("attack.attacker_rate must be in [0, 1]");
  if (!(replay_rate >= 0.0 && replay_rate <= 1.0)) throw Error("attack.replay_rate must be in [0, 1]");
  if (flip_map.empty()) return;
  if (flip_map.size() != classes) throw Error("attack.flip_map must have one entry per class");
  auto sorted = flip_map;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t l = 0; l < classes; ++l) {
    if (sorted[l] != l) throw Error("attack.flip_map is not a permutation of the labels");
  }
}

std::vector<std::uint32_t> AttackConfig::resolved_flip_map(std::uint32_t classes) const {
  validate(classes);
  return flip_map.empty() ? default_flip_map(classes) : flip_map;
}

std::set<DeviceId> select_attackers(std::span<const DeviceId> ids, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("attacker rate must be in [0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(ids.size())));
  std::set<DeviceId> out;
  for (auto i : rng.sample_without_replacement(ids.size(), count)) out.insert(ids[i]);
  return out;
}

DatasetShard apply_poison(const DatasetShard& shard, std::span<const std::uint32_t> flip_map) {
  DatasetShard out = shard;
  for (auto& l : out.labels) {
    if (l >= flip_map.size()) throw Error("label " + std::to_string(l) + " outside the flip map");
    l = flip_map[l];
  }
  return out;
}

const ModelUpdate& maybe_replay(const ModelUpdate& fresh, std::span<const ModelUpdate> history, double replay_rate,
                                Rng& rng) {
  const bool attack = rng.bernoulli(replay_rate);
  if (attack && !history.empty()) return history.front();
  return fresh;
}

}  // namespace litechain::adversary
