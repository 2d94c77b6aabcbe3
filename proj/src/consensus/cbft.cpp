#include "litechain/consensus/cbft.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace litechain::consensus {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::prepare: return "prepare";
    case Phase::verify: return "verify";
    case Phase::commit: return "commit";
    case Phase::reply: return "reply";
    case Phase::done: return "done";
    case Phase::aborted: return "aborted";
  }
  return "unknown";
}

ConsensusRound::ConsensusRound(DeviceId requester, std::vector<DeviceId> committee)
    : requester_(requester), committee_(std::move(committee)), threshold_(vote_threshold(committee_.size())) {
  if (committee_.size() < 4) {
    throw Error("BFT minimum violated: committee of " + std::to_string(committee_.size()));
  }
  std::vector<DeviceId> sorted = committee_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error("duplicate committee member");
}

void ConsensusRound::vote(DeviceId member, bool yes) {
  if (phase_ != Phase::verify && phase_ != Phase::commit) {
    throw Error("no vote expected in phase " + to_string(phase_));
  }
  if (std::find(committee_.begin(), committee_.end(), member) == committee_.end()) {
    throw Error("vote from non-member " + std::to_string(member));
  }
  auto& phase_votes = votes_[phase_];
  if (phase_votes.contains(member)) throw Error("member " + std::to_string(member) + " voted twice");
  phase_votes[member] = yes;
}

std::size_t ConsensusRound::yes_votes() const {
  const auto it = votes_.find(phase_);
  if (it == votes_.end()) return 0;
  return static_cast<std::size_t>(
      std::count_if(it->second.begin(), it->second.end(), [](const auto& kv) { return kv.second; }));
}

Phase ConsensusRound::advance() {
  switch (phase_) {
    case Phase::prepare: phase_ = Phase::verify; break;
    case Phase::verify: phase_ = yes_votes() >= threshold_ ? Phase::commit : Phase::aborted; break;
    case Phase::commit: phase_ = yes_votes() >= threshold_ ? Phase::reply : Phase::aborted; break;
    case Phase::reply: phase_ = Phase::done; break;
    case Phase::done:
    case Phase::aborted: throw Error("consensus round already finished");
  }
  return phase_;
}

const std::map<DeviceId, bool>& ConsensusRound::votes(Phase p) const {
  static const std::map<DeviceId, bool> none;
  const auto it = votes_.find(p);
  return it == votes_.end() ? none : it->second;
}

CommitResult cbft_commit(Block block, const ModelUpdate& model, std::span<const Seat> committee, Ledger& ledger,
                         const QualityFn& quality, const CbftOptions& options, Rng& rng,
                         std::vector<Block> extra) {
  if (block.model_id != model.identifier) throw Error("block model_id does not match the model identifier");
  std::vector<DeviceId> ids;
  for (const auto& s : committee) ids.push_back(s.id);
  ConsensusRound round(block.proposer, ids);
  CommitResult result;

  // Behaviour is fixed for the whole round and always consumes K draws.
  std::vector<char> honest(committee.size());
  for (std::size_t m = 0; m < committee.size(); ++m) {
    const bool draw = rng.bernoulli(committee[m].reliability);
    honest[m] = draw && !committee[m].forced_no;
  }

  round.advance();  // prepare: the requester broadcasts the block
  if (options.broadcast_time > options.broadcast_timeout) {
    result.reason = "timeout";
    result.final_phase = Phase::aborted;
    return result;
  }

  const bool replay = options.duplicate_check && ledger.has_model(model.identifier);
  std::size_t honest_count = 0;
  for (std::size_t m = 0; m < committee.size(); ++m) {
    bool valid = model.signature_valid && !replay;
    if (valid && honest[m] && options.quality_check) {
      valid = quality(model, committee[m].id) >= options.min_accuracy;
    }
    honest_count += honest[m] ? 1 : 0;
    round.vote(committee[m].id, honest[m] && valid);
  }
  if (round.advance() == Phase::aborted) {
    result.final_phase = Phase::aborted;
    if (replay) {
      result.reason = "replay";
    } else if (!model.signature_valid) {
      result.reason = "signature";
    } else if (honest_count >= round.threshold()) {
      result.reason = "quality";
    } else {
      result.reason = "votes";
    }
    return result;
  }

  // Honest members commit once they have seen the verify quorum.
  for (std::size_t m = 0; m < committee.size(); ++m) round.vote(committee[m].id, honest[m] != 0);
  if (round.advance() == Phase::aborted) {
    result.final_phase = Phase::aborted;
    result.reason = "votes";
    return result;
  }
  for (const auto& [id, yes] : round.votes(Phase::commit)) {
    if (yes) result.endorsers.push_back(id);
  }
  result.final_phase = round.advance();  // reply to the requester
  result.committed = true;
  result.height = ledger.append(std::move(block)).height;
  for (auto& b : extra) ledger.append(std::move(b));
  return result;
}

std::map<DeviceId, double> normalize_reputation(const std::map<DeviceId, double>& scores,
                                                const ReputationRule& rule) {
  std::map<DeviceId, double> out;
  if (scores.empty()) return out;
  double lo = scores.begin()->second, hi = lo;
  for (const auto& [id, s] : scores) {
    if (!(s >= 0.0)) throw Error("negative reputation for device " + std::to_string(id));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (const auto& [id, s] : scores) {
    if (hi == 0.0) {
      out[id] = rule.prior;
    } else if (hi == lo) {
      out[id] = rule.ceiling;
    } else {
      out[id] = rule.floor + (s - lo) / (hi - lo) * (rule.ceiling - rule.floor);
    }
  }
  return out;
}

namespace {

std::optional<std::uint64_t> last_checkpoint_round(const Ledger& ledger) {
  std::optional<std::uint64_t> r;
  for (const auto& b : ledger.blocks()) {
    if (b.kind == BlockKind::checkpoint) r = b.round;
  }
  return r;
}

}  // namespace

std::map<DeviceId, double> epoch_rewards(const Ledger& ledger, std::uint64_t since_round,
                                         const std::map<DeviceId, std::uint64_t>& endorsements,
                                         const UpdateConfig& cfg) {
  std::map<DeviceId, double> granted;
  for (const auto& b : ledger.blocks()) {
    if (b.kind != BlockKind::model || b.round <= since_round) continue;
    double total = 0.0;
    for (const auto& p : b.participation) {
      if (p.verified) total += static_cast<double>(p.samples);
    }
    if (total <= 0.0) continue;
    for (const auto& p : b.participation) {
      if (p.verified) granted[p.device] += cfg.reward_block * static_cast<double>(p.samples) / total;
    }
  }
  for (const auto& [id, n] : endorsements) granted[id] += cfg.reward_vote * static_cast<double>(n);
  return granted;
}

UpdateOutcome update_consensus(Ledger& ledger, const Partition& partition, std::vector<Device>& devices,
                               clustering::ValueModel& model, const std::set<DeviceId>& forced_no,
                               const std::map<DeviceId, std::uint64_t>& endorsements, std::uint64_t now_round,
                               double now_time, const UpdateConfig& cfg, Rng& rng) {
  if (!partition.feasible()) throw Error("update consensus needs a feasible partition");
  std::map<DeviceId, std::size_t> index;
  for (std::size_t i = 0; i < devices.size(); ++i) index[devices[i].id] = i;

  UpdateOutcome out;
  // Rounds start at 1, so "no checkpoint yet" means everything on the chain.
  out.granted = epoch_rewards(ledger, last_checkpoint_round(ledger).value_or(0), endorsements, cfg);

  Partition current = partition;
  const auto threshold = vote_threshold(current.num_clusters());
  for (out.attempts = 1; out.attempts <= cfg.max_attempts; ++out.attempts) {
    std::size_t yes[2] = {0, 0};
    for (const auto& [k, head] : current.committee) {
      const bool honest = rng.bernoulli(devices.at(index.at(head)).reliability) && !forced_no.contains(head);
      // Both vote phases (reputation agreement, then model synchronization).
      yes[0] += honest;
      yes[1] += honest;
    }
    if (yes[0] >= threshold && yes[1] >= threshold) {
      out.success = true;
      break;
    }
    out.diagnostics.push_back("update consensus attempt " + std::to_string(out.attempts) + " failed with " +
                              std::to_string(yes[0]) + "/" + std::to_string(current.num_clusters()) +
                              " votes; redrawing committee");
    for (const auto& [k, members] : current.clusters()) {
      current.committee[k] = members[rng.below(members.size())];
    }
  }
  if (!out.success) {
    out.attempts = cfg.max_attempts;
    out.diagnostics.push_back("update consensus gave up after " + std::to_string(cfg.max_attempts) +
                              " attempts at round " + std::to_string(now_round));
    out.partition = partition;
    for (const auto& d : devices) out.reliability[d.id] = d.reliability;
    return out;
  }

  for (const auto& d : devices) ledger.reputation.try_emplace(d.id, 0.0);
  for (const auto& [id, g] : out.granted) ledger.reputation[id] += g;
  ++ledger.epoch;

  Digest latest{};
  for (const auto& b : ledger.blocks()) {
    if (b.kind == BlockKind::model) latest = b.model_id;
  }
  Block cp;
  cp.kind = BlockKind::checkpoint;
  cp.model_id = latest;
  cp.proposer = current.committee.begin()->second;
  cp.cluster = current.committee.begin()->first;
  cp.round = now_round;
  cp.timestamp = std::max(now_time, ledger.tip().timestamp);
  cp.payload = Checkpoint{latest, ledger.epoch, ledger.reputation}.encode();
  ledger.append(std::move(cp));

  // Keep the last full epoch plus the checkpoint just written.
  const std::uint64_t keep_after = now_round >= cfg.chi ? now_round - cfg.chi : 0;
  std::uint64_t cut = ledger.tip().height;
  for (const auto& b : ledger.blocks()) {
    if (b.kind != BlockKind::checkpoint && b.kind != BlockKind::genesis && b.round > keep_after) {
      cut = b.height;
      break;
    }
  }
  out.pruned = ledger.prune_below(cut);

  out.reliability = normalize_reputation(ledger.reputation, cfg.rule);
  for (auto& d : devices) {
    d.reputation = ledger.reputation.at(d.id);
    d.reliability = out.reliability.at(d.id);
  }
  model.set_reliabilities(out.reliability);
  model.reelect_all(current);
  assign_roles(devices, current);
  out.partition = current;
  return out;
}

}  // namespace litechain::consensus
