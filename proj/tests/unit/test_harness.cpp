#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "litechain/core/serialize.hpp"
#include "litechain/harness/run.hpp"
#include "litechain/harness/scenario.hpp"
#include "litechain/secmetric/security.hpp"

using namespace litechain;
using namespace litechain::harness;
using nlohmann::json;

namespace {

Scenario small(Scheme scheme = Scheme::litechain) {
  auto s = scenario_from_json(json{
      {"seed", 11},
      {"devices", 8},
      {"reliability", {0.9, 0.99}},
      {"data", {{"samples", 1200}, {"spread", 1.45}}},
      {"fl", {{"learning_rate", 0.05}, {"epochs", 2}}},
      {"protocol", {{"chi", 10}}},
      {"stop", {{"max_rounds", 25}, {"stop_at_target", false}}},
  });
  s.scheme = scheme;
  return s;
}

std::string config_error(const json& j) {
  try {
    scenario_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<double> column(const MetricsLog& log, double RoundRecord::*field) {
  std::vector<double> out;
  for (const auto& r : log.rows) out.push_back(r.*field);
  return out;
}

}  // namespace

TEST_CASE("defaults follow the published parameter table") {
  const auto s = scenario_from_json(json::object());
  CHECK(s.channel.broadcast_timeout == 300.0);
  CHECK(s.channel.broadcast_coef == 0.5);
  CHECK(s.channel.antenna_gain == 4.11);
  CHECK(s.channel.carrier_freq == 915e6);
  CHECK(s.channel.pathloss_exp == 2.8);
  CHECK(s.channel.light_speed == 3e8);
  CHECK(s.fl.batch == 128);
  CHECK(s.fl.epochs == 1);
  CHECK(s.fl.learning_rate == 0.001);
  CHECK(s.area == 1000.0);
  CHECK(s.protocol.chi == 20);
  CHECK(s.stop.target_accuracy == 0.73);
  CHECK(s.accuracy_threshold() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.compute_tiers.size() == 4);
  CHECK(s.scheme == Scheme::litechain);
  CHECK(s.quality_check());
  CHECK(s.offchain_verify());
  CHECK(s.duplicate_check());

  auto flc = scenario_from_json(json{{"scheme", "flc_hash"}});
  CHECK_FALSE(flc.quality_check());
  CHECK_FALSE(flc.offchain_verify());
  CHECK(flc.duplicate_check());

  CHECK(reliability_range("medium") == std::pair{0.33, 0.66});
  CHECK(reliability_range("high") == std::pair{0.66, 0.99});
  const auto med = scenario_from_json(json{{"reliability", "medium"}});
  CHECK(med.reliability_low == 0.33);
  CHECK(med.reliability_high == 0.66);
}

TEST_CASE("config round-trips through JSON") {
  auto s = small();
  s.protocol.staleness_base = 0.25;
  s.attack.kind = adversary::AttackKind::replay;
  s.attack.attacker_rate = 0.2;
  const auto back = scenario_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  CHECK(back.protocol.staleness_base == 0.25);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error(json{{"fl", {{"learnign_rate", 0.1}}}}) == "fl.learnign_rate: unknown field");
  CHECK(config_error(json{{"fl", {{"learning_rate", "fast"}}}}) == "fl.learning_rate: expected a number");
  CHECK(config_error(json{{"devices", 3}}).starts_with("devices:"));
  CHECK(config_error(json{{"devices", -5}}) == "devices: expected a non-negative integer");
  CHECK(config_error(json{{"scheme", "blockfl"}}).starts_with("scheme:"));
  CHECK(config_error(json{{"reliability", "extreme"}}).starts_with("reliability:"));
  CHECK(config_error(json{{"reliability", {0.9, 0.5}}}).starts_with("reliability:"));
  CHECK(config_error(json{{"attack", {{"attacker_rate", 1.5}}}}).starts_with("attack:"));
  CHECK(config_error(json{{"channel", {{"bandwidth", 0}}}}).starts_with("channel:"));
  CHECK(config_error(json{{"scheme", "flc_hash"}, {"protocol", {{"offchain_verify", true}}}})
            .starts_with("protocol.offchain_verify:"));
  CHECK(config_error(json::array()) == "<root>: expected an object");
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("single-field overrides") {
  const auto s = with_field(small(), "fl.learning_rate", 0.2);
  CHECK(s.fl.learning_rate == 0.2);
  CHECK(with_field(small(), "scheme", "flc_model").scheme == Scheme::flc_model);
  CHECK_THROWS_WITH_AS(with_field(small(), "fl.nope", 1), "fl.nope: unknown field", ConfigError);
  CHECK_THROWS_AS(with_field(small(), "fl.batch", 0), ConfigError);
}

TEST_CASE("a fixed seed reproduces the run byte for byte") {
  for (auto scheme : {Scheme::litechain, Scheme::flc_hash}) {
    const auto a = run_scenario(small(scheme));
    const auto b = run_scenario(small(scheme));
    CHECK(metrics_csv(a) == metrics_csv(b));
    CHECK(summary_json(a).dump() == summary_json(b).dump());
    std::ostringstream la, lb;
    a.ledger.export_text(la);
    b.ledger.export_text(lb);
    CHECK(la.str() == lb.str());
  }
  auto other = small();
  other.seed = 12;
  CHECK(metrics_csv(run_scenario(other)) != metrics_csv(run_scenario(small())));
}

TEST_CASE("simulated time reconciles with per-round latencies") {
  const auto log = run_scenario(small());
  double acc = 0.0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const auto& r = log.rows[i];
    acc += r.round_latency + r.consensus_latency;
    CHECK(r.sim_time >= log.rows[i - 1].sim_time);
    CHECK(r.round_latency >= std::max(r.tt_latency, r.vt_latency));
    CHECK(r.sim_time == doctest::Approx(acc).epsilon(1e-12));
  }
  CHECK(log.rows.back().sim_time == doctest::Approx(log.accounted_time).epsilon(1e-12));
}

TEST_CASE("update consensus runs every chi rounds and only for litechain") {
  const auto log = run_scenario(small());
  for (const auto& r : log.rows) {
    const bool epoch = r.round > 0 && r.round % 10 == 0;
    CHECK((r.update_attempts > 0) == epoch);
    CHECK((r.consensus_latency > 0.0) == epoch);
  }
  CHECK(log.ledger.epoch == 2);
  const auto flc = run_scenario(small(Scheme::flc_hash));
  for (const auto& r : flc.rows) CHECK(r.update_attempts == 0);
  CHECK(flc.ledger.epoch == 0);
  CHECK(flc.final_partition.num_clusters() == 8);
}

TEST_CASE("ledger bytes agree with block serialization") {
  for (auto scheme : {Scheme::litechain, Scheme::flc_hash, Scheme::flc_model}) {
    const auto log = run_scenario(small(scheme));
    std::size_t live = 0;
    for (const auto& b : log.ledger.blocks()) live += serialize(b).size();
    CHECK(log.rows.back().ledger_bytes == live);
    CHECK_FALSE(log.ledger.verify().has_value());
    std::stringstream text;
    log.ledger.export_text(text);
    CHECK_FALSE(consensus::Ledger::import_text(text).verify().has_value());
  }
}

TEST_CASE("one-tier schemes differ only in what the block carries") {
  const auto hash = run_scenario(small(Scheme::flc_hash));
  const auto full = run_scenario(small(Scheme::flc_model));
  CHECK(column(hash, &RoundRecord::test_accuracy) == column(full, &RoundRecord::test_accuracy));

  // Per committed model the extra bytes are exactly the serialized weights.
  const std::size_t params = 16 * 10 + 10;
  const std::size_t model_bytes = serialize_weights(std::vector<double>(params, 0.0)).size();
  std::size_t committed = 0;
  for (const auto& r : hash.rows) committed += r.committed;
  CHECK(full.ledger.live_bytes() - hash.ledger.live_bytes() == committed * model_bytes);
  CHECK(full.rows.back().sim_time > hash.rows.back().sim_time);

  // Smaller blocks split the model into fragments, each with its own header.
  auto frag = small(Scheme::flc_model);
  frag.sizes.block_size = 500;
  const auto split = run_scenario(frag);
  const std::size_t pieces = (model_bytes + 499) / 500;
  std::size_t fragments = 0;
  for (const auto& b : split.ledger.blocks()) fragments += b.kind == consensus::BlockKind::fragment;
  CHECK(fragments == committed * (pieces - 1));
  CHECK(column(split, &RoundRecord::test_accuracy) == column(hash, &RoundRecord::test_accuracy));
}

TEST_CASE("schemes share placement, shards and initial weights") {
  const auto lite = run_scenario(small(Scheme::litechain));
  const auto flc = run_scenario(small(Scheme::flc_hash));
  CHECK(lite.rows.front().test_accuracy == flc.rows.front().test_accuracy);
  std::map<DeviceId, std::uint64_t> a, b;
  for (const auto& blk : lite.ledger.blocks()) {
    for (const auto& p : blk.participation) a[p.device] = p.samples;
  }
  for (const auto& blk : flc.ledger.blocks()) {
    for (const auto& p : blk.participation) b[p.device] = p.samples;
  }
  CHECK(a.size() == 8);
  CHECK(a == b);
}

TEST_CASE("attacks at rate zero leave the honest run untouched") {
  const auto honest = metrics_csv(run_scenario(small()));
  for (auto kind : {adversary::AttackKind::replay, adversary::AttackKind::label_flip,
                    adversary::AttackKind::committee_vote_no}) {
    auto s = small();
    s.attack.kind = kind;
    s.attack.attacker_rate = 0.0;
    s.attack.seed = 99;
    CHECK(metrics_csv(run_scenario(s)) == honest);
  }
}

TEST_CASE("replayed blocks are rejected, or recorded as duplicates without the check") {
  auto s = small();
  s.attack.kind = adversary::AttackKind::replay;
  s.attack.attacker_rate = 1.0;
  s.attack.replay_rate = 1.0;
  const auto guarded = run_scenario(s);
  std::size_t replays = 0;
  for (const auto& r : guarded.rows) replays += r.rejected.count("replay") ? r.rejected.at("replay") : 0;
  CHECK(replays > 0);
  CHECK(guarded.ledger.duplicate_model_heights().empty());

  s.protocol.duplicate_check = false;
  const auto open = run_scenario(s);
  CHECK_FALSE(open.ledger.duplicate_model_heights().empty());
}

TEST_CASE("label flipping is filtered off-chain") {
  auto s = small();
  s.attack.kind = adversary::AttackKind::label_flip;
  s.attack.attacker_rate = 0.5;
  s.fl.epochs = 5;
  const auto log = run_scenario(s);
  std::size_t rejected = 0;
  for (const auto& r : log.rows) rejected += r.offchain_rejected;
  CHECK(rejected > 0);
  CHECK(log.attackers.size() == 4);
}

TEST_CASE("module errors carry round and phase") {
  auto s = small();
  s.fl.learning_rate = std::numeric_limits<double>::infinity();
  try {
    run_scenario(s);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).starts_with("round 1, phase local_train: divergence at step"));
  }
}

TEST_CASE("early stop at the target accuracy") {
  auto s = small();
  s.stop.stop_at_target = true;
  s.stop.target_accuracy = 0.5;
  const auto log = run_scenario(s);
  REQUIRE(log.time_to_target.has_value());
  CHECK(log.rows.back().round == *log.rounds_to_target);
  CHECK(log.rows.back().test_accuracy >= 0.5);
  CHECK(*log.time_to_target == log.rows.back().sim_time);
  for (std::size_t i = 0; i + 1 < log.rows.size(); ++i) CHECK(log.rows[i].test_accuracy < 0.5);
}

TEST_CASE("accuracy grid resamples the round log") {
  const auto log = run_scenario(small());
  const auto grid = log.accuracy_grid();
  CHECK(grid.size() == static_cast<std::size_t>(std::floor(log.rows.back().sim_time)) + 1);
  CHECK(grid.front().second == log.rows.front().test_accuracy);
  for (const auto& [t, a] : grid) {
    double expect = log.rows.front().test_accuracy;
    for (const auto& r : log.rows) {
      if (r.sim_time <= t) expect = r.test_accuracy;
    }
    CHECK(a == expect);
  }
}

TEST_CASE("storage report") {
  const auto zero = storage_report(small(), 0);
  REQUIRE(zero.size() == 1);
  const consensus::Ledger genesis;
  for (const auto& [scheme, bytes] : zero[0].live_bytes) CHECK(bytes == genesis.live_bytes());

  const auto rows = storage_report(small(), 30);
  for (const auto& r : rows) {
    if (r.round < 10) continue;
    CHECK(r.live_bytes.at(Scheme::flc_model) > r.live_bytes.at(Scheme::flc_hash));
    CHECK(r.live_bytes.at(Scheme::flc_hash) > r.live_bytes.at(Scheme::litechain));
  }
}

TEST_CASE("security report") {
  auto s = small();
  const auto pinned = security_report(s, 0.99, 0.99, 1, 50, Scheme::flc_hash);
  REQUIRE(pinned.size() == 1);
  CHECK(pinned[0] == secmetric::security_dft(std::vector<double>(50, 0.99)));

  const auto high = security_report(s, 0.66, 0.99, 10, 50, Scheme::flc_hash);
  for (double v : high) CHECK(v > 0.95);

  const auto a = security_report(s, 0.33, 0.66, 3, 20, Scheme::litechain);
  CHECK(a == security_report(s, 0.33, 0.66, 3, 20, Scheme::litechain));
  for (double v : a) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(security_report(s, 0.33, 0.66, 0, 20, Scheme::litechain), Error);
}

TEST_CASE("outputs land in the requested directory") {
  const auto dir = std::filesystem::temp_directory_path() / "litechain_harness_out";
  std::filesystem::remove_all(dir);
  auto s = small();
  s.stop.max_rounds = 3;
  const auto log = run_scenario(s);
  write_outputs(log, dir);
  for (const char* f : {"metrics.csv", "accuracy_grid.csv", "welfare.csv", "summary.json", "ledger.txt"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream in(dir / "summary.json");
  const auto j = json::parse(in);
  CHECK(j.at("rounds") == 3);
  CHECK(j.at("scheme") == "litechain");
  std::ifstream csv(dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.starts_with("round,sim_time,"));

  ::setenv("LITECHAIN_OUT_DIR", "/tmp/elsewhere", 1);
  CHECK(output_dir("out") == "/tmp/elsewhere");
  ::unsetenv("LITECHAIN_OUT_DIR");
  CHECK(output_dir("out") == "out");
  std::filesystem::remove_all(dir);
}
