#include <chrono>
#include <functional>
#include <set>

#include "doctest.h"
#include "litechain/clustering/game.hpp"
#include "litechain/core/rng.hpp"
#include "litechain/secmetric/security.hpp"

using namespace litechain;
using namespace litechain::clustering;

namespace {

Device make_device(DeviceId id, Position pos, double compute, std::size_t samples,
                   double reliability) {
  Device d;
  d.id = id;
  d.position = pos;
  d.compute = compute;
  d.tx_power = 0.2;
  d.reliability = reliability;
  d.dataset.dim = 1;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = 0.0;
    d.dataset.push_back(&x, 0);
  }
  return d;
}

std::vector<Device> toy_six() {
  const Position pos[] = {{0, 0}, {40, 10}, {15, 60}, {500, 500}, {540, 520}, {480, 560}};
  const double comp[] = {1e11, 3e11, 2e11, 5e11, 1e11, 4e11};
  const std::size_t samples[] = {60, 40, 80, 50, 70, 30};
  const double rel[] = {0.95, 0.8, 0.9, 0.85, 0.99, 0.7};
  std::vector<Device> out;
  for (DeviceId i = 0; i < 6; ++i) out.push_back(make_device(i, pos[i], comp[i], samples[i], rel[i]));
  return out;
}

std::vector<Device> random_scenario(Rng& rng, std::size_t n) {
  std::vector<Device> out;
  for (DeviceId i = 0; i < n; ++i) {
    out.push_back(make_device(i, {rng.uniform(0, 1000), rng.uniform(0, 1000)},
                              rng.uniform(5e10, 5e11), 20 + rng.below(200),
                              rng.uniform(0.6, 0.99)));
  }
  return out;
}

// Cluster value composed from the radio and security oracles directly.
double composed_value(const Partition& p, ClusterId k, std::span<const Device> devs) {
  std::vector<double> rel;
  for (const auto& [c, head] : p.committee) rel.push_back(devs[head].reliability);
  const double s = secmetric::security_dft(rel);
  const auto rl = radio::round_latency(p, devs, radio::SizeProfile{}, radio::ChannelParams{});
  for (const auto& cl : rl.clusters) {
    if (cl.cluster == k) return s / cl.total();
  }
  FAIL("cluster missing");
  return 0.0;
}

// All set partitions of {0..n-1}, as cluster labels.
void for_each_partition(std::size_t n, const std::function<void(const std::vector<ClusterId>&)>& f) {
  std::vector<ClusterId> label(n, 0);
  std::function<void(std::size_t, ClusterId)> rec = [&](std::size_t i, ClusterId used) {
    if (i == n) {
      f(label);
      return;
    }
    for (ClusterId c = 0; c <= used; ++c) {
      label[i] = c;
      rec(i + 1, c == used ? used + 1 : used);
    }
  };
  rec(0, 0);
}

}  // namespace

TEST_CASE("cluster value matches a hand-composed security over latency") {
  const auto devs = toy_six();
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const ValueModel model(devs, links, radio::SizeProfile{});
  Partition p;
  const ClusterId cl[] = {0, 0, 2, 3, 4, 4};
  for (DeviceId i = 0; i < 6; ++i) p.assignments[i] = cl[i];
  p.committee = {{0, 1}, {2, 2}, {3, 3}, {4, 4}};
  const auto e = model.evaluate(p);
  REQUIRE(e.feasible);
  double welfare = 0;
  for (ClusterId k : {0u, 2u, 3u, 4u}) {
    const double v = composed_value(p, k, devs);
    CHECK(e.value.at(k) == doctest::Approx(v).epsilon(1e-12));
    CHECK(model.cluster_value(p, k) == doctest::Approx(v).epsilon(1e-12));
    welfare += v;
  }
  CHECK(e.welfare == doctest::Approx(welfare).epsilon(1e-12));
  CHECK(model.cluster_value(p, 99) == 0.0);
}

TEST_CASE("infeasible partitions pay the penalty") {
  const auto devs = toy_six();
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const ValueModel model(devs, links, radio::SizeProfile{});
  model.evaluate(Partition::singletons({0, 1, 2, 3, 4, 5}));  // record a scale
  Partition p;
  for (DeviceId i = 0; i < 6; ++i) p.assignments[i] = i / 2;
  p.committee = {{0, 0}, {1, 2}, {2, 4}};
  const auto e = model.evaluate(p);
  CHECK_FALSE(e.feasible);
  for (const auto& [k, v] : e.value) CHECK(v < 0.0);
  CHECK(model.penalty() > 0.0);
}

TEST_CASE("switch gain equals the recomputed welfare difference") {
  const auto devs = toy_six();
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const ValueModel model(devs, links, radio::SizeProfile{});
  const auto start = Partition::singletons({0, 1, 2, 3, 4, 5});
  for (DeviceId d = 0; d < 6; ++d) {
    for (ClusterId to = 0; to < 6; ++to) {
      if (to == d) continue;
      const auto after = model.apply(start, {d, d, to, 0.0});
      CHECK(after.feasible() == true);
      CHECK(after.num_clusters() == 5);
      const double direct = model.evaluate(after).welfare - model.evaluate(start).welfare;
      CHECK(model.switch_gain(start, d, to) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("election picks the value-maximizing head") {
  const auto devs = toy_six();
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const ValueModel model(devs, links, radio::SizeProfile{});
  Partition p;
  const ClusterId cl[] = {0, 0, 0, 3, 4, 5};
  for (DeviceId i = 0; i < 6; ++i) p.assignments[i] = cl[i];
  p.committee = {{0, 0}, {3, 3}, {4, 4}, {5, 5}};
  const auto chosen = model.elect(p, 0);
  double best = -1;
  DeviceId arg = 0;
  for (DeviceId h : {0u, 1u, 2u}) {
    p.committee[0] = h;
    const double v = composed_value(p, 0, devs);
    if (v > best) {
      best = v;
      arg = h;
    }
  }
  CHECK(chosen == arg);
}

TEST_CASE("symmetric network: identical destinations give identical gains") {
  std::vector<Device> devs;
  for (DeviceId i = 0; i < 8; ++i) devs.push_back(make_device(i, {double(i), 0}, 1e11, 50, 0.9));
  std::vector<std::vector<double>> rates(8, std::vector<double>(8, 1e8));
  const radio::LinkTable links(devs, rates, radio::ChannelParams{});
  const ValueModel model(devs, links, radio::SizeProfile{});
  Partition p;
  for (DeviceId i = 0; i < 8; ++i) p.assignments[i] = i / 2;
  p.committee = {{0, 0}, {1, 2}, {2, 4}, {3, 6}};
  const auto e = model.evaluate(p);
  for (const auto& [k, v] : e.value) CHECK(v == doctest::Approx(e.value.at(0)).epsilon(1e-14));
  // Device 1 moving into cluster 2 or cluster 3 is the same move up to relabelling.
  CHECK(model.switch_gain(p, 1, 2) == doctest::Approx(model.switch_gain(p, 1, 3)).epsilon(1e-12));
  // Swapping which cluster a device sits in between two identical ones changes nothing:
  // both trial partitions have identical welfare.
  const auto a = model.evaluate(model.apply(p, {1, 0, 2, 0})).welfare;
  const auto b = model.evaluate(model.apply(p, {3, 1, 2, 0})).welfare;
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("four colocated devices stay as singletons") {
  std::vector<Device> devs;
  for (DeviceId i = 0; i < 4; ++i) devs.push_back(make_device(i, {double(i), 0}, 1e11, 50, 0.9));
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const auto res = run_game(devs, links, radio::SizeProfile{});
  CHECK(res.partition == Partition::singletons({0, 1, 2, 3}));
  CHECK(res.trace.empty());

  // Exhaustively: the singleton partition is the only feasible one and the
  // best under the value model.
  const ValueModel model(devs, links, radio::SizeProfile{});
  const double best = model.evaluate(res.partition).welfare;
  int feasible = 0;
  for_each_partition(4, [&](const std::vector<ClusterId>& label) {
    Partition p;
    for (DeviceId i = 0; i < 4; ++i) p.assignments[i] = label[i];
    for (const auto& [k, members] : p.clusters()) p.committee[k] = members.front();
    model.reelect_all(p);
    const auto e = model.evaluate(p);
    feasible += e.feasible;
    CHECK(e.welfare <= best);
  });
  CHECK(feasible == 1);
}

TEST_CASE("two spatial blobs end in a Nash-stable feasible partition") {
  std::vector<Device> devs;
  Rng rng(17);
  for (DeviceId i = 0; i < 8; ++i) {
    const double cx = i < 4 ? 0.0 : 900.0;
    devs.push_back(make_device(i, {cx + rng.uniform(0, 20), rng.uniform(0, 20)}, 1e11, 50,
                               rng.uniform(0.8, 0.99)));
  }
  const radio::LinkTable links(devs, radio::ChannelParams{});
  const auto res = run_game(devs, links, radio::SizeProfile{});
  CHECK(res.partition.feasible());
  const ValueModel model(devs, links, radio::SizeProfile{});
  CHECK(model.nash_audit(res.partition).empty());
  // No cluster straddles the blobs.
  for (const auto& [k, members] : res.partition.clusters()) {
    std::set<bool> sides;
    for (auto m : members) sides.insert(m < 4);
    CHECK(sides.size() == 1);
  }
  CHECK(res.welfare >= res.initial_welfare);
}

TEST_CASE("game properties on random scenarios") {
  Rng master(2025);
  for (int trial = 0; trial < 6; ++trial) {
    auto rng = master.split(static_cast<std::uint64_t>(trial));
    const auto devs = random_scenario(rng, 10 + 2 * trial);
    const radio::LinkTable links(devs, radio::ChannelParams{});
    const auto res = run_game(devs, links, radio::SizeProfile{});
    CAPTURE(trial);
    CHECK(res.partition.feasible());
    double w = res.initial_welfare;
    std::set<Digest> seen;
    for (const auto& slot : res.trace) {
      CHECK(slot.welfare > w);
      w = slot.welfare;
      CHECK(seen.insert(slot.partition_hash).second);
    }
    const ValueModel model(devs, links, radio::SizeProfile{});
    CHECK(model.nash_audit(res.partition).empty());
    CHECK(model.evaluate(res.partition).welfare == doctest::Approx(res.welfare).epsilon(1e-12));

    const auto again = run_game(devs, links, radio::SizeProfile{});
    CHECK(again.partition == res.partition);
    CHECK(again.slots == res.slots);
  }
}

TEST_CASE("game rejects tiny networks and honours the slot cap") {
  std::vector<Device> devs;
  for (DeviceId i = 0; i < 3; ++i) devs.push_back(make_device(i, {double(i), 0}, 1e11, 50, 0.9));
  const radio::LinkTable links(devs, radio::ChannelParams{});
  CHECK_THROWS_AS(run_game(devs, links, radio::SizeProfile{}), Error);

  Rng rng(4);
  const auto many = random_scenario(rng, 12);
  const radio::LinkTable l2(many, radio::ChannelParams{});
  GameConfig cfg;
  cfg.max_slots = 1;
  const auto full = run_game(many, l2, radio::SizeProfile{});
  if (full.slots > 1) CHECK_THROWS_AS(run_game(many, l2, radio::SizeProfile{}, cfg), Error);
}
