#pragma once

// Scenario description loaded from a JSON file. Every field has a default, so
// `{}` is a valid scenario; unknown keys are rejected so that typos surface.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "litechain/adversary/attacks.hpp"
#include "litechain/clustering/game.hpp"
#include "litechain/core/types.hpp"
#include "litechain/fl/model.hpp"
#include "litechain/fl/train.hpp"
#include "litechain/radio/radio.hpp"

namespace litechain::harness {

enum class Scheme : std::uint8_t { litechain, flc_model, flc_hash };

std::string to_string(Scheme s);
Scheme scheme_from(const std::string& s);

/// Load-time failure. what() names the offending field, e.g.
/// "fl.learning_rate: expected a number".
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataConfig {
  /// Optional CSV (label, features...) used instead of synthetic blobs.
  std::string csv;
  std::size_t dim = 16;
  std::uint32_t classes = 10;
  std::size_t samples = 6000;
  double center_scale = 1.0;
  double spread = 1.0;
  double test_fraction = 0.2;
  double dirichlet_alpha = 5.0;
};

struct ModelConfig {
  fl::ModelKind kind = fl::ModelKind::softmax_linear;
  std::size_t hidden = 32;
  /// Absent: derived from the scenario seed.
  std::optional<std::uint64_t> init_seed;
};

struct ProtocolConfig {
  std::uint64_t chi = 20;
  /// Accuracy threshold; absent means 1/L.
  std::optional<double> accuracy_threshold;
  double reward_block = 100.0;
  double reward_vote = 1.0;
  /// Staleness base s; absent means 1/K.
  std::optional<double> staleness_base;
  double staleness_exp = 0.5;
  /// Rows each committee member keeps for verification.
  std::size_t verify_sample = 64;
  /// Absent: on for every scheme.
  std::optional<bool> duplicate_check;
  /// Absent: on for litechain, off for the one-tier baselines.
  std::optional<bool> quality_check;
  /// Absent: on for litechain; the baselines have no off-chain step.
  std::optional<bool> offchain_verify;
  double reputation_floor = 0.1;
  double reputation_ceiling = 0.99;
  double reputation_prior = 0.5;
  int max_update_attempts = 10;
};

struct StopConfig {
  double target_accuracy = 0.73;
  std::uint64_t max_rounds = 200;
  /// False keeps going to max_rounds after the target is reached.
  bool stop_at_target = true;
};

struct Scenario {
  std::string name = "scenario";
  Scheme scheme = Scheme::litechain;
  std::uint64_t seed = 1;
  std::size_t devices = 20;
  double area = 1000.0;
  /// Capacities assigned round-robin (flops/s).
  std::vector<double> compute_tiers{2e10, 1e11, 2e11, 4e11};
  double tx_power = 0.2;
  double reliability_low = 0.66;
  double reliability_high = 0.99;
  radio::ChannelParams channel;
  radio::SizeProfile sizes;
  DataConfig data;
  ModelConfig model;
  fl::TrainConfig fl;
  ProtocolConfig protocol;
  clustering::GameConfig clustering;
  adversary::AttackConfig attack;
  StopConfig stop;
  /// Step of the resampled accuracy grid, in simulated seconds.
  double grid_step = 1.0;

  bool duplicate_check() const { return protocol.duplicate_check.value_or(true); }
  bool quality_check() const { return protocol.quality_check.value_or(scheme == Scheme::litechain); }
  bool offchain_verify() const { return protocol.offchain_verify.value_or(scheme == Scheme::litechain); }
  double accuracy_threshold() const { return protocol.accuracy_threshold.value_or(1.0 / data.classes); }

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

/// Named reliability ranges: "medium" [0.33, 0.66] and "high" [0.66, 0.99].
std::pair<double, double> reliability_range(const std::string& name);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
/// Throws ConfigError for a missing or unparsable file.
Scenario load_scenario(const std::filesystem::path& path);

/// Set one scalar field addressed by a dotted path ("fl.learning_rate").
Scenario with_field(const Scenario& s, const std::string& path, const nlohmann::json& value);

}  // namespace litechain::harness
