#pragma once

// The simulated-time round loop, its metrics and the derived reports.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "litechain/consensus/ledger.hpp"
#include "litechain/core/types.hpp"
#include "litechain/harness/scenario.hpp"

namespace litechain::harness {

/// One row per round; row 0 is the state before training.
struct RoundRecord {
  std::uint64_t round = 0;
  double sim_time = 0.0;          // end of the round, including any update consensus
  double round_latency = 0.0;     // slowest device of the round
  double consensus_latency = 0.0; // update consensus run after the round, if any
  double tt_latency = 0.0;        // slowest cluster's training + aggregation
  double vt_latency = 0.0;        // slowest cluster's block verification
  double test_accuracy = 0.0;
  std::size_t ledger_bytes = 0;   // live chain
  std::size_t ledger_written = 0; // everything ever appended
  double security = 0.0;          // of the committee that ran the round
  std::size_t clusters = 0;
  std::size_t committed = 0;
  std::map<std::string, std::size_t> rejected;  // by cbft reason
  std::size_t offchain_rejected = 0;            // local models dropped before aggregation
  std::size_t empty_clusters = 0;               // clusters with nothing left to aggregate
  int update_attempts = 0;                      // 0 when no update consensus ran
  double welfare = 0.0;
};

inline const std::vector<std::string>& reject_reasons() {
  static const std::vector<std::string> r{"replay", "signature", "quality", "timeout", "votes"};
  return r;
}

struct MetricsLog {
  Scenario scenario;
  std::vector<RoundRecord> rows;
  /// Welfare after every executed slot of the clustering game (litechain).
  std::vector<double> welfare_trace;
  std::size_t game_slots = 0;
  Partition initial_partition;
  Partition final_partition;
  std::set<DeviceId> attackers;
  std::optional<double> time_to_target;
  std::optional<std::uint64_t> rounds_to_target;
  std::vector<std::string> diagnostics;
  consensus::Ledger ledger;
  /// Sum of per-round maxima and consensus latencies kept apart from sim_time.
  double accounted_time = 0.0;

  double final_accuracy() const { return rows.back().test_accuracy; }
  double best_accuracy() const;
  /// Accuracy resampled onto [0, sim_time] at scenario.grid_step: the value
  /// of the latest round finished at or before each grid point.
  std::vector<std::pair<double, double>> accuracy_grid() const;
};

/// Run a validated scenario. Module errors are rethrown as
/// "round R, phase P: <message>".
MetricsLog run_scenario(const Scenario& s);

/// metrics.csv, accuracy_grid.csv, welfare.csv, summary.json and ledger.txt.
void write_outputs(const MetricsLog& log, const std::filesystem::path& dir);
std::string metrics_csv(const MetricsLog& log);
nlohmann::json summary_json(const MetricsLog& log);

/// Live ledger bytes after every round for each scheme, all on the same seed
/// and with early stopping disabled. Row 0 is the genesis-only chain.
struct StorageRow {
  std::uint64_t round = 0;
  std::map<Scheme, std::size_t> live_bytes;
};
std::vector<StorageRow> storage_report(const Scenario& base, std::uint64_t rounds);

/// Security of the scheme's committee for `trials` independent draws of
/// device placement and reliabilities in [low, high].
std::vector<double> security_report(const Scenario& base, double low, double high, std::size_t trials,
                                    std::size_t devices, Scheme scheme);

/// Devices of a scenario: positions, compute tiers and reliabilities, without
/// datasets. Same seed, same devices, whatever the scheme.
std::vector<Device> place_devices(const Scenario& s, Rng& placement, Rng& reliability);

/// Scenario output directory: $LITECHAIN_OUT_DIR when set, else `fallback`.
std::filesystem::path output_dir(const std::filesystem::path& fallback);

}  // namespace litechain::harness
