// Command-line front end: run, sweep, security, storage, verify-ledger.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "litechain/consensus/ledger.hpp"
#include "litechain/harness/run.hpp"
#include "litechain/harness/scenario.hpp"

namespace lh = litechain::harness;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;

// "0.5" -> number, "true" -> bool, anything unparsable -> string.
json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

lh::Scenario load(const std::string& path, const std::vector<std::string>& sets) {
  auto s = lh::load_scenario(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lh::ConfigError(kv + ": expected field=value");
    s = lh::with_field(s, kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
  }
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw litechain::Error("cannot write " + path);
  return file;
}

void report(const lh::MetricsLog& log, double wall) {
  const auto& last = log.rows.back();
  std::cerr << lh::to_string(log.scenario.scheme) << ": " << last.round << " rounds, sim_time " << last.sim_time
            << " s, accuracy " << last.test_accuracy;
  if (log.time_to_target) std::cerr << ", target at " << *log.time_to_target << " s";
  std::cerr << ", K=" << log.final_partition.num_clusters() << ", ledger " << last.ledger_bytes << " B (" << wall
            << " s wall)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiteChain federated-learning blockchain simulator"};
  app.require_subcommand(1);

  std::string config, out = "out", scheme_override;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run one scenario and write its metrics");
  run->add_option("--config", config, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory (LITECHAIN_OUT_DIR overrides)");
  run->add_option("--scheme", scheme_override, "litechain, flc_model or flc_hash");
  run->add_option("--set", sets, "field=value overrides, e.g. fl.learning_rate=0.05");

  std::string field;
  std::vector<std::string> values;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Vary one scalar field across values");
  sweep->add_option("--config", config, "Scenario JSON file")->required();
  sweep->add_option("--field", field, "Dotted field path")->required();
  sweep->add_option("--values", values, "Values to try")->required()->delimiter(',');
  sweep->add_option("--seed", seed, "Override the scenario seed");
  sweep->add_option("--out", out, "Output directory (LITECHAIN_OUT_DIR overrides)");
  sweep->add_option("--scheme", scheme_override, "litechain, flc_model or flc_hash");
  sweep->add_option("--set", sets, "field=value overrides applied before the sweep");
  sweep->add_option("--jobs", jobs, "Scenarios run concurrently")->check(CLI::Range(1u, 256u));

  std::string range = "high", csv_out;
  std::size_t trials = 100, devices = 50;
  auto* security = app.add_subcommand("security", "Committee security scores over random draws");
  security->add_option("--config", config, "Scenario JSON file")->required();
  security->add_option("--range", range, "medium, high or low,high");
  security->add_option("--trials", trials, "Number of draws")->check(CLI::PositiveNumber);
  security->add_option("--devices", devices, "Devices per draw")->check(CLI::Range(4ul, 100000ul));
  security->add_option("--scheme", scheme_override, "litechain or a one-tier scheme");
  security->add_option("--seed", seed, "Override the scenario seed");
  security->add_option("--csv", csv_out, "Write scores here instead of stdout");

  std::uint64_t rounds = 100;
  auto* storage = app.add_subcommand("storage", "Live ledger bytes per round for every scheme");
  storage->add_option("--config", config, "Scenario JSON file")->required();
  storage->add_option("--rounds", rounds, "Rounds to simulate");
  storage->add_option("--seed", seed, "Override the scenario seed");
  storage->add_option("--set", sets, "field=value overrides");
  storage->add_option("--csv", csv_out, "Write the table here instead of stdout");

  std::string ledger_file;
  auto* verify = app.add_subcommand("verify-ledger", "Re-validate an exported chain");
  verify->add_option("file", ledger_file, "ledger.txt written by run")->required();

  CLI11_PARSE(app, argc, argv);

  lh::Scenario s;
  if (!config.empty()) {
    try {
      s = load(config, sets);
      if (seed) s.seed = *seed;
      if (!scheme_override.empty() && !security->parsed()) {
        s = lh::with_field(s, "scheme", scheme_override);
      }
    } catch (const litechain::Error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfigError;
    }
  }

  try {
    if (run->parsed()) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto log = lh::run_scenario(s);
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;
      const auto dir = lh::output_dir(out);
      lh::write_outputs(log, dir);
      report(log, wall.count());
      std::cerr << "wrote " << dir.string() << '\n';
      return 0;
    }

    if (sweep->parsed()) {
      std::vector<lh::Scenario> variants;
      for (const auto& v : values) {
        try {
          variants.push_back(lh::with_field(s, field, parse_value(v)));
        } catch (const litechain::Error& e) {
          std::cerr << "config error: " << e.what() << '\n';
          return kConfigError;
        }
      }
      const auto dir = lh::output_dir(out);
      std::vector<std::future<lh::MetricsLog>> pending;
      std::vector<lh::MetricsLog> logs;
      for (std::size_t i = 0; i < variants.size(); ++i) {
        pending.push_back(std::async(std::launch::async, [&variants, i] { return lh::run_scenario(variants[i]); }));
        if (pending.size() == jobs || i + 1 == variants.size()) {
          for (auto& f : pending) logs.push_back(f.get());
          pending.clear();
        }
      }
      std::filesystem::create_directories(dir);
      std::ofstream table(dir / "sweep.csv");
      table << "value,final_accuracy,best_accuracy,time_to_target,sim_time,rounds,ledger_bytes,clusters\n";
      for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto& log = logs[i];
        lh::write_outputs(log, dir / (field + "=" + values[i]));
        table << values[i] << ',' << fmt(log.final_accuracy()) << ',' << fmt(log.best_accuracy()) << ','
              << (log.time_to_target ? fmt(*log.time_to_target) : "") << ',' << fmt(log.rows.back().sim_time) << ','
              << log.rows.back().round << ',' << log.rows.back().ledger_bytes << ','
              << log.final_partition.num_clusters() << '\n';
      }
      std::cerr << "wrote " << (dir / "sweep.csv").string() << '\n';
      return 0;
    }

    if (security->parsed()) {
      double lo = 0, hi = 0;
      lh::Scheme scheme = lh::Scheme::litechain;
      try {
        if (const auto c = range.find(','); c != std::string::npos) {
          lo = std::stod(range.substr(0, c));
          hi = std::stod(range.substr(c + 1));
        } else {
          std::tie(lo, hi) = lh::reliability_range(range);
        }
        if (!scheme_override.empty()) scheme = lh::scheme_from(scheme_override);
      } catch (const std::exception& e) {
        std::cerr << "config error: --range/--scheme: " << e.what() << '\n';
        return kConfigError;
      }
      const auto scores = lh::security_report(s, lo, hi, trials, devices, scheme);
      std::ofstream file;
      auto& os = open_or_stdout(csv_out, file);
      os << "trial,security\n";
      for (std::size_t i = 0; i < scores.size(); ++i) os << i << ',' << fmt(scores[i]) << '\n';
      auto sorted = scores;
      std::sort(sorted.begin(), sorted.end());
      std::cerr << "median " << sorted[sorted.size() / 2] << ", min " << sorted.front() << ", max " << sorted.back()
                << '\n';
      return 0;
    }

    if (storage->parsed()) {
      const auto rows = lh::storage_report(s, rounds);
      std::ofstream file;
      auto& os = open_or_stdout(csv_out, file);
      os << "round,litechain,flc_hash,flc_model\n";
      for (const auto& r : rows) {
        os << r.round << ',' << r.live_bytes.at(lh::Scheme::litechain) << ',' << r.live_bytes.at(lh::Scheme::flc_hash)
           << ',' << r.live_bytes.at(lh::Scheme::flc_model) << '\n';
      }
      return 0;
    }

    if (verify->parsed()) {
      std::ifstream in(ledger_file);
      if (!in) {
        std::cerr << "cannot open " << ledger_file << '\n';
        return 1;
      }
      const auto ledger = litechain::consensus::Ledger::import_text(in);
      if (const auto bad = ledger.verify()) {
        std::cerr << "ledger corrupt: block at height " << *bad << " fails verification\n";
        return 1;
      }
      std::cout << "ledger ok: " << ledger.blocks().size() << " blocks, heights " << ledger.blocks().front().height
                << ".." << ledger.tip().height << '\n';
      return 0;
    }
  } catch (const litechain::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
