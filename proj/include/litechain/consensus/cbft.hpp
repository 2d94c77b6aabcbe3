#pragma once

// Block commit (prepare / verify / commit / reply) and the periodic update
// consensus that rewards contributors, prunes the chain and re-elects heads.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "litechain/clustering/game.hpp"
#include "litechain/consensus/ledger.hpp"
#include "litechain/core/rng.hpp"
#include "litechain/core/types.hpp"

namespace litechain::consensus {

/// Votes needed out of k: ceil((2k + 1) / 3).
constexpr std::size_t vote_threshold(std::size_t k) { return (2 * k + 1 + 2) / 3; }

struct Seat {
  DeviceId id = 0;
  double reliability = 1.0;
  /// Adversarial member that votes no in every phase.
  bool forced_no = false;
};

enum class Phase : std::uint8_t { prepare, verify, commit, reply, done, aborted };

std::string to_string(Phase p);

class ConsensusRound {
 public:
  ConsensusRound(DeviceId requester, std::vector<DeviceId> committee);

  Phase phase() const { return phase_; }
  DeviceId requester() const { return requester_; }
  std::size_t threshold() const { return threshold_; }
  const std::vector<DeviceId>& committee() const { return committee_; }

  /// Record a vote for the current voting phase (verify or commit).
  void vote(DeviceId member, bool yes);
  std::size_t yes_votes() const;
  /// Close the current phase. Verify and commit need `threshold` yes votes;
  /// otherwise the round aborts. Phases never move backwards.
  Phase advance();
  const std::map<DeviceId, bool>& votes(Phase p) const;

 private:
  DeviceId requester_;
  std::vector<DeviceId> committee_;
  std::size_t threshold_;
  Phase phase_ = Phase::prepare;
  std::map<Phase, std::map<DeviceId, bool>> votes_;
};

struct CbftOptions {
  bool duplicate_check = true;
  bool quality_check = true;
  /// Accuracy threshold; defaults to 1/L at the call site.
  double min_accuracy = 0.1;
  /// Per-message broadcast time above which the round times out.
  double broadcast_time = 0.0;
  double broadcast_timeout = 300.0;
};

/// Sample accuracy of `model` as judged by committee member `verifier`.
using QualityFn = std::function<double(const ModelUpdate& model, DeviceId verifier)>;

struct CommitResult {
  bool committed = false;
  /// Empty on success; otherwise one of replay, signature, quality, timeout, votes.
  std::string reason;
  /// Committee members whose reply vote counted toward the commit.
  std::vector<DeviceId> endorsers;
  Phase final_phase = Phase::prepare;
  std::uint64_t height = 0;
};

/// Run one block through the committee. `block.model_id` must equal
/// `model.identifier`; on success the block (and `extra` fragment blocks, if
/// any) are appended to the ledger. Member behaviour is drawn once per round:
/// honest with probability equal to its reliability, in which case it votes
/// for validity; otherwise it votes no.
CommitResult cbft_commit(Block block, const ModelUpdate& model, std::span<const Seat> committee, Ledger& ledger,
                         const QualityFn& quality, const CbftOptions& options, Rng& rng,
                         std::vector<Block> extra = {});

struct ReputationRule {
  double floor = 0.1;
  double ceiling = 0.99;
  /// Reliability given to everyone when every score is zero.
  double prior = 0.5;
};

/// Min-max normalization of scores into [floor, ceiling].
std::map<DeviceId, double> normalize_reputation(const std::map<DeviceId, double>& scores,
                                                const ReputationRule& rule = {});

struct UpdateConfig {
  std::uint64_t chi = 20;
  double reward_block = 100.0;   // R^{b+}
  double reward_vote = 1.0;      // R^{b-}
  ReputationRule rule;
  int max_attempts = 10;
};

/// Reputation grants for one epoch: each committed model block's reward is
/// split over its verified participants by data size, and every endorsement
/// earns reward_vote.
std::map<DeviceId, double> epoch_rewards(const Ledger& ledger, std::uint64_t since_round,
                                         const std::map<DeviceId, std::uint64_t>& endorsements,
                                         const UpdateConfig& cfg);

struct UpdateOutcome {
  bool success = false;
  int attempts = 0;
  std::vector<std::string> diagnostics;
  Partition partition;
  std::map<DeviceId, double> reliability;
  std::size_t pruned = 0;
  std::map<DeviceId, double> granted;
};

/// Periodic update consensus at round `now_round`. On success the rewards are
/// booked, a checkpoint is appended, blocks before the last epoch are pruned,
/// devices get reliabilities from normalized reputation and heads are
/// re-elected through `model`. A failed vote redraws one random head per
/// cluster and retries up to cfg.max_attempts times.
UpdateOutcome update_consensus(Ledger& ledger, const Partition& partition, std::vector<Device>& devices,
                               clustering::ValueModel& model, const std::set<DeviceId>& forced_no,
                               const std::map<DeviceId, std::uint64_t>& endorsements, std::uint64_t now_round,
                               double now_time, const UpdateConfig& cfg, Rng& rng);

}  // namespace litechain::consensus
