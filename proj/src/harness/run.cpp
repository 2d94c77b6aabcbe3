#include "litechain/harness/run.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "litechain/adversary/attacks.hpp"
#include "litechain/clustering/game.hpp"
#include "litechain/consensus/cbft.hpp"
#include "litechain/core/serialize.hpp"
#include "litechain/fl/data.hpp"
#include "litechain/fl/model.hpp"
#include "litechain/fl/train.hpp"
#include "litechain/secmetric/security.hpp"

namespace litechain::harness {

using nlohmann::json;

namespace {

template <typename F>
auto guarded(std::uint64_t round, const char* phase, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error("round " + std::to_string(round) + ", phase " + phase + ": " + e.what());
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double committee_security(const Partition& p, const std::vector<Device>& devices) {
  std::vector<double> rel;
  for (const auto& [k, h] : p.committee) rel.push_back(devices.at(h).reliability);
  return secmetric::security_dft(rel);
}

// Training latency only needs a sample count, so the security report gives
// every device a placeholder shard of its expected size.
DatasetShard nominal_shard(std::size_t rows) {
  DatasetShard d;
  d.dim = 1;
  d.features.assign(rows, 0.0);
  d.labels.assign(rows, 0);
  return d;
}

struct Data {
  DatasetShard test;
  std::vector<DatasetShard> shards;
  std::size_t dim = 0;
};

Data load_data(const Scenario& s, const Rng& root) {
  DatasetShard all;
  if (!s.data.csv.empty()) {
    std::ifstream in(s.data.csv);
    if (!in) throw Error("cannot open dataset " + s.data.csv);
    all = fl::read_csv(in);
  } else {
    fl::BlobConfig bc{s.data.dim, s.data.classes, s.data.samples, s.data.center_scale, s.data.spread};
    Rng r = root.split("data");
    all = fl::make_blobs(bc, r);
  }
  all.validate(s.data.classes);
  auto [train, test] = fl::split_train_test(all, s.data.test_fraction);
  Rng pr = root.split("partition");
  Data d;
  d.shards = fl::partition_data(train, s.devices, s.data.dirichlet_alpha, s.data.classes, pr);
  d.test = std::move(test);
  d.dim = all.dim;
  return d;
}

// Splits a serialized model into block-sized pieces; the first rides in the
// model block, the rest in fragment blocks that follow it.
std::vector<std::vector<std::uint8_t>> fragments(const std::vector<std::uint8_t>& bytes, std::size_t chunk) {
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t at = 0; at < bytes.size(); at += chunk) {
    const auto end = std::min(bytes.size(), at + chunk);
    out.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace

std::vector<Device> place_devices(const Scenario& s, Rng& placement, Rng& reliability) {
  std::vector<Device> devices(s.devices);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    auto& d = devices[i];
    d.id = static_cast<DeviceId>(i);
    // Redraw positions closer than 1 m to an earlier device.
    for (int tries = 0; tries < 1000; ++tries) {
      d.position = {placement.uniform(0.0, s.area), placement.uniform(0.0, s.area)};
      bool clear = true;
      for (std::size_t j = 0; j < i && clear; ++j) clear = distance(d.position, devices[j].position) >= 1.0;
      if (clear) break;
    }
    d.compute = s.compute_tiers[i % s.compute_tiers.size()];
    d.tx_power = s.tx_power;
    d.reliability = reliability.uniform(s.reliability_low, s.reliability_high);
  }
  return devices;
}

double MetricsLog::best_accuracy() const {
  double b = 0.0;
  for (const auto& r : rows) b = std::max(b, r.test_accuracy);
  return b;
}

std::vector<std::pair<double, double>> MetricsLog::accuracy_grid() const {
  std::vector<std::pair<double, double>> out;
  if (rows.empty()) return out;
  const double end = rows.back().sim_time;
  std::size_t r = 0;
  for (std::size_t i = 0;; ++i) {
    const double g = static_cast<double>(i) * scenario.grid_step;
    if (g > end) break;
    while (r + 1 < rows.size() && rows[r + 1].sim_time <= g) ++r;
    out.emplace_back(g, rows[r].test_accuracy);
  }
  return out;
}

MetricsLog run_scenario(const Scenario& s) {
  s.validate();
  MetricsLog log;
  log.scenario = s;
  const Rng root(s.seed);
  const bool lite = s.scheme == Scheme::litechain;

  Rng placement = root.split("placement");
  Rng rel = root.split("reliability");
  auto devices = place_devices(s, placement, rel);
  const std::size_t n = devices.size();

  auto data = guarded(0, "data", [&] { return load_data(s, root); });
  std::vector<DatasetShard> verify(n);
  for (std::size_t i = 0; i < n; ++i) {
    devices[i].dataset = data.shards[i];
    Rng vr = root.split("verify-sample").split(i);
    verify[i] = fl::sample_rows(data.shards[i], s.protocol.verify_sample, vr);
  }

  fl::ModelSpec spec;
  spec.kind = s.model.kind;
  spec.input_dim = data.dim;
  spec.classes = s.data.classes;
  spec.hidden = s.model.kind == fl::ModelKind::mlp ? s.model.hidden : 0;
  spec.init_seed = s.model.init_seed.value_or(root.split("init").key());
  spec.validate();
  const auto init = fl::init_weights(spec);

  std::vector<DeviceId> ids(n);
  std::iota(ids.begin(), ids.end(), DeviceId{0});
  if (s.attack.kind != adversary::AttackKind::none) {
    Rng ar = Rng(s.attack.seed).split("select");
    log.attackers = adversary::select_attackers(ids, s.attack.attacker_rate, ar);
  }
  auto train_shards = data.shards;
  if (s.attack.kind == adversary::AttackKind::label_flip) {
    const auto map = s.attack.resolved_flip_map(s.data.classes);
    for (auto a : log.attackers) train_shards[a] = adversary::apply_poison(data.shards[a], map);
  }
  std::set<DeviceId> forced_no;
  if (s.attack.kind == adversary::AttackKind::committee_vote_no) forced_no = log.attackers;
  const bool replaying = s.attack.kind == adversary::AttackKind::replay;
  const Rng replay_root = Rng(s.attack.seed).split("replay");

  radio::LinkTable links(devices, s.channel);
  std::unique_ptr<clustering::ValueModel> value;
  Partition part;
  if (lite) {
    auto g = guarded(0, "clustering", [&] { return clustering::run_game(devices, links, s.sizes, s.clustering); });
    part = g.partition;
    log.game_slots = g.slots;
    log.welfare_trace.push_back(g.initial_welfare);
    for (const auto& t : g.trace) log.welfare_trace.push_back(t.welfare);
    value = std::make_unique<clustering::ValueModel>(devices, links, s.sizes, s.clustering);
  } else {
    part = Partition::singletons(ids);
  }
  assign_roles(devices, part);
  log.initial_partition = part;

  // flc_model ships the whole model inside the block it broadcasts.
  radio::SizeProfile lat_sizes = s.sizes;
  if (s.scheme == Scheme::flc_model) lat_sizes.block_size += s.sizes.model_size;

  std::vector<ClusterId> cids;
  for (const auto& [k, h] : part.committee) cids.push_back(k);
  const double sbase = s.protocol.staleness_base.value_or(1.0 / static_cast<double>(cids.size()));
  fl::StalenessAggregator agg(cids, init, sbase, s.protocol.staleness_exp);
  std::map<ClusterId, std::vector<double>> model;
  std::map<ClusterId, std::uint64_t> version;
  for (auto k : cids) {
    model[k] = init;
    version[k] = 0;
  }
  std::map<Digest, std::uint64_t> tau_of;
  std::map<DeviceId, std::vector<ModelUpdate>> history;
  std::map<DeviceId, std::uint64_t> endorsements;

  consensus::CbftOptions opt;
  opt.duplicate_check = s.duplicate_check();
  opt.quality_check = s.quality_check();
  opt.min_accuracy = s.accuracy_threshold();
  opt.broadcast_timeout = s.channel.broadcast_timeout;
  consensus::UpdateConfig ucfg;
  ucfg.chi = s.protocol.chi;
  ucfg.reward_block = s.protocol.reward_block;
  ucfg.reward_vote = s.protocol.reward_vote;
  ucfg.rule = {s.protocol.reputation_floor, s.protocol.reputation_ceiling, s.protocol.reputation_prior};
  ucfg.max_attempts = s.protocol.max_update_attempts;
  const auto chunk = static_cast<std::size_t>(s.sizes.block_size);

  auto& ledger = log.ledger;
  double welfare = value ? value->evaluate(part).welfare : 0.0;
  {
    RoundRecord r0;
    r0.test_accuracy = fl::accuracy(spec, agg.global(), data.test);
    r0.ledger_bytes = ledger.live_bytes();
    r0.ledger_written = ledger.written_bytes();
    r0.security = committee_security(part, devices);
    r0.clusters = part.num_clusters();
    r0.welfare = welfare;
    log.rows.push_back(r0);
  }

  double now = 0.0;
  for (std::uint64_t t = 1; t <= s.stop.max_rounds; ++t) {
    RoundRecord row;
    row.round = t;
    const auto rl = guarded(t, "latency", [&] { return radio::round_latency(part, devices, links, lat_sizes); });
    row.round_latency = rl.max;
    std::map<ClusterId, const radio::ClusterLatency*> lat_of;
    for (const auto& c : rl.clusters) {
      lat_of[c.cluster] = &c;
      row.tt_latency = std::max(row.tt_latency, c.train_max + c.aggregate);
      row.vt_latency = std::max(row.vt_latency, c.chain.total());
    }
    const double commit_time = now + rl.max;
    std::vector<consensus::Seat> seats;
    for (const auto& [k, h] : part.committee) seats.push_back({h, devices[h].reliability, forced_no.contains(h)});
    row.security = committee_security(part, devices);
    const double peers = static_cast<double>(std::max<std::size_t>(1, part.num_clusters() - 1));

    std::vector<ClusterId> synced;
    for (const auto& [k, members] : part.clusters()) {
      const DeviceId head = part.committee.at(k);
      std::vector<std::vector<double>> accepted;
      std::vector<double> sizes;
      std::vector<consensus::Participation> parts;
      for (DeviceId i : members) {
        Rng tr = root.split("train").split(i).split(t);
        auto u = guarded(t, "local_train",
                         [&] { return fl::local_train(spec, model[k], train_shards[i], s.fl, i, t, tr); });
        bool ok = true;
        if (s.offchain_verify()) {
          ok = fl::offchain_verify(u, spec, verify[head], s.accuracy_threshold()).accepted;
          if (!ok) ++row.offchain_rejected;
        }
        parts.push_back({i, data.shards[i].size(), ok});
        if (ok) {
          accepted.push_back(std::move(u.weights));
          sizes.push_back(static_cast<double>(data.shards[i].size()));
        }
      }
      if (accepted.empty()) {
        ++row.empty_clusters;
        continue;
      }
      ModelUpdate fresh;
      fresh.weights = guarded(t, "fedavg", [&] { return fl::fedavg(accepted, sizes); });
      fresh.owner = head;
      fresh.round = t;
      fresh.local_steps = static_cast<std::uint32_t>(fl::local_steps(s.fl, data.shards[head].size()));
      fresh.seal();
      tau_of.try_emplace(fresh.identifier, version[k] + 1);

      ModelUpdate proposal = fresh;
      if (replaying && log.attackers.contains(head)) {
        auto& h = history[head];
        Rng rr = replay_root.split(head).split(t);
        proposal = adversary::maybe_replay(fresh, h, s.attack.replay_rate, rr);
        h.push_back(fresh);
      }

      consensus::Block b;
      b.kind = consensus::BlockKind::model;
      b.model_id = proposal.identifier;
      b.proposer = head;
      b.cluster = k;
      b.round = t;
      b.participation = std::move(parts);
      b.timestamp = commit_time;
      std::vector<consensus::Block> extra;
      if (s.scheme == Scheme::flc_model) {
        auto pieces = fragments(serialize_weights(proposal.weights), chunk);
        b.payload = std::move(pieces.front());
        for (std::size_t f = 1; f < pieces.size(); ++f) {
          consensus::Block fb;
          fb.kind = consensus::BlockKind::fragment;
          fb.model_id = b.model_id;
          fb.proposer = head;
          fb.cluster = k;
          fb.round = t;
          fb.payload = std::move(pieces[f]);
          fb.timestamp = commit_time;
          extra.push_back(std::move(fb));
        }
      }
      opt.broadcast_time = lat_of.at(k)->chain.broadcast / peers;
      auto quality = [&](const ModelUpdate& m, DeviceId v) { return fl::accuracy(spec, m.weights, verify[v]); };
      Rng cr = root.split("cbft").split(t).split(k);
      const auto res = guarded(t, "cbft_commit", [&] {
        return consensus::cbft_commit(std::move(b), proposal, seats, ledger, quality, opt, cr, std::move(extra));
      });
      if (!res.committed) {
        // The cluster keeps training from its own aggregate; its base version
        // stays put, so a later commit is discounted as stale.
        ++row.rejected[res.reason];
        model[k] = std::move(fresh.weights);
        continue;
      }
      ++row.committed;
      for (auto e : res.endorsers) ++endorsements[e];
      guarded(t, "staleness_aggregate",
              [&] { agg.contribute(k, tau_of.at(proposal.identifier), proposal.weights, t); });
      synced.push_back(k);
    }
    // A cluster adopts the new aggregate once its own block is on chain.
    for (auto k : synced) {
      model[k] = agg.global();
      version[k] = t;
    }
    now = commit_time;
    log.accounted_time += rl.max;

    if (lite && t % s.protocol.chi == 0) {
      std::vector<std::size_t> committee;
      for (const auto& [k, h] : part.committee) committee.push_back(h);
      double per_attempt = 0.0;
      for (auto h : committee) per_attempt = std::max(per_attempt, links.verify_latency(h, committee, lat_sizes).total());
      Rng ur = root.split("update").split(t);
      const auto out = guarded(t, "update_consensus", [&] {
        return consensus::update_consensus(ledger, part, devices, *value, forced_no, endorsements, t, now, ucfg, ur);
      });
      row.update_attempts = out.attempts;
      row.consensus_latency = out.attempts * per_attempt;
      for (const auto& d : out.diagnostics) log.diagnostics.push_back(d);
      if (out.success) {
        part = out.partition;
        endorsements.clear();
        // Update consensus synchronizes every cluster on the latest aggregate.
        for (auto k : cids) {
          model[k] = agg.global();
          version[k] = t;
        }
        welfare = value->evaluate(part).welfare;
      }
      now += row.consensus_latency;
      log.accounted_time += row.consensus_latency;
    }

    row.sim_time = now;
    row.test_accuracy = fl::accuracy(spec, agg.global(), data.test);
    row.ledger_bytes = ledger.live_bytes();
    row.ledger_written = ledger.written_bytes();
    row.clusters = part.num_clusters();
    row.welfare = welfare;
    log.rows.push_back(row);
    if (!log.time_to_target && row.test_accuracy >= s.stop.target_accuracy) {
      log.time_to_target = now;
      log.rounds_to_target = t;
      if (s.stop.stop_at_target) break;
    }
  }
  log.final_partition = part;
  return log;
}

std::string metrics_csv(const MetricsLog& log) {
  std::ostringstream out;
  out << "round,sim_time,round_latency,consensus_latency,tt_latency,vt_latency,test_accuracy,ledger_bytes,"
         "ledger_written,security,clusters,committed";
  for (const auto& r : reject_reasons()) out << ",rejected_" << r;
  out << ",offchain_rejected,empty_clusters,update_attempts,welfare\n";
  for (const auto& r : log.rows) {
    out << r.round << ',' << num(r.sim_time) << ',' << num(r.round_latency) << ',' << num(r.consensus_latency) << ','
        << num(r.tt_latency) << ',' << num(r.vt_latency) << ',' << num(r.test_accuracy) << ',' << r.ledger_bytes << ','
        << r.ledger_written << ',' << num(r.security) << ',' << r.clusters << ',' << r.committed;
    for (const auto& reason : reject_reasons()) {
      const auto it = r.rejected.find(reason);
      out << ',' << (it == r.rejected.end() ? 0 : it->second);
    }
    out << ',' << r.offchain_rejected << ',' << r.empty_clusters << ',' << r.update_attempts << ',' << num(r.welfare)
        << '\n';
  }
  return out.str();
}

json summary_json(const MetricsLog& log) {
  std::size_t committed = 0, offchain = 0;
  std::map<std::string, std::size_t> rejected;
  for (const auto& r : reject_reasons()) rejected[r] = 0;
  for (const auto& row : log.rows) {
    committed += row.committed;
    offchain += row.offchain_rejected;
    for (const auto& [k, v] : row.rejected) rejected[k] += v;
  }
  auto heads = [](const Partition& p) {
    json h = json::array();
    for (const auto& [k, d] : p.committee) h.push_back(d);
    return h;
  };
  const auto& last = log.rows.back();
  return json{
      {"scheme", to_string(log.scenario.scheme)},
      {"seed", log.scenario.seed},
      {"rounds", last.round},
      {"sim_time", last.sim_time},
      {"accounted_time", log.accounted_time},
      {"final_accuracy", last.test_accuracy},
      {"best_accuracy", log.best_accuracy()},
      {"target_accuracy", log.scenario.stop.target_accuracy},
      {"time_to_target", log.time_to_target ? json(*log.time_to_target) : json(nullptr)},
      {"rounds_to_target", log.rounds_to_target ? json(*log.rounds_to_target) : json(nullptr)},
      {"clusters", {{"initial", log.initial_partition.num_clusters()}, {"final", log.final_partition.num_clusters()}}},
      {"committee", {{"initial", heads(log.initial_partition)}, {"final", heads(log.final_partition)}}},
      {"attackers", log.attackers},
      {"ledger",
       {{"live_bytes", log.ledger.live_bytes()},
        {"written_bytes", log.ledger.written_bytes()},
        {"live_blocks", log.ledger.blocks().size()},
        {"tip_height", log.ledger.tip().height},
        {"epochs", log.ledger.epoch}}},
      {"committed", committed},
      {"rejected", rejected},
      {"offchain_rejected", offchain},
      {"game",
       {{"slots", log.game_slots},
        {"initial_welfare", log.welfare_trace.empty() ? json(nullptr) : json(log.welfare_trace.front())},
        {"final_welfare", log.welfare_trace.empty() ? json(nullptr) : json(log.welfare_trace.back())}}},
      {"diagnostics", log.diagnostics},
      {"scenario", to_json(log.scenario)},
  };
}

void write_outputs(const MetricsLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  open("metrics.csv") << metrics_csv(log);
  {
    auto f = open("accuracy_grid.csv");
    f << "sim_time,test_accuracy\n";
    for (const auto& [g, a] : log.accuracy_grid()) f << num(g) << ',' << num(a) << '\n';
  }
  {
    auto f = open("welfare.csv");
    f << "slot,welfare\n";
    for (std::size_t i = 0; i < log.welfare_trace.size(); ++i) f << i << ',' << num(log.welfare_trace[i]) << '\n';
  }
  open("summary.json") << summary_json(log).dump(2) << '\n';
  {
    auto f = open("ledger.txt");
    log.ledger.export_text(f);
  }
}

std::vector<StorageRow> storage_report(const Scenario& base, std::uint64_t rounds) {
  std::vector<StorageRow> out(rounds + 1);
  for (std::uint64_t r = 0; r <= rounds; ++r) out[r].round = r;
  for (auto scheme : {Scheme::litechain, Scheme::flc_hash, Scheme::flc_model}) {
    Scenario s = base;
    s.scheme = scheme;
    s.stop.max_rounds = rounds;
    s.stop.stop_at_target = false;
    if (scheme != Scheme::litechain) s.protocol.offchain_verify.reset();
    const auto log = run_scenario(s);
    for (std::uint64_t r = 0; r <= rounds; ++r) out[r].live_bytes[scheme] = log.rows.at(r).ledger_bytes;
  }
  return out;
}

std::vector<double> security_report(const Scenario& base, double low, double high, std::size_t trials,
                                    std::size_t devices, Scheme scheme) {
  if (trials == 0) throw Error("security report needs at least one trial");
  Scenario s = base;
  s.devices = devices;
  s.reliability_low = low;
  s.reliability_high = high;
  s.validate();
  const auto per_device = static_cast<std::size_t>(
      std::llround(static_cast<double>(s.data.samples) * (1.0 - s.data.test_fraction) / static_cast<double>(devices)));
  std::vector<double> out;
  out.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const Rng tr = Rng(s.seed).split("security").split(i);
    Rng pl = tr.split("placement");
    Rng rr = tr.split("reliability");
    auto devs = place_devices(s, pl, rr);
    std::vector<double> rel;
    if (scheme == Scheme::litechain) {
      for (auto& d : devs) d.dataset = nominal_shard(std::max<std::size_t>(1, per_device));
      radio::LinkTable links(devs, s.channel);
      const auto g = clustering::run_game(devs, links, s.sizes, s.clustering);
      for (const auto& [k, h] : g.partition.committee) rel.push_back(devs[h].reliability);
    } else {
      for (const auto& d : devs) rel.push_back(d.reliability);
    }
    out.push_back(secmetric::security_dft(rel));
  }
  return out;
}

std::filesystem::path output_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("LITECHAIN_OUT_DIR"); env && *env) return env;
  return fallback;
}

}  // namespace litechain::harness
