#include "litechain/clustering/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "litechain/core/bytes.hpp"
#include "litechain/core/serialize.hpp"
#include "litechain/secmetric/security.hpp"

namespace litechain::clustering {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index-based working copy of a partition. Cluster slots are dense indices;
// `ext` maps them back to external cluster ids.
struct State {
  std::vector<int> cluster_of;
  std::vector<std::vector<int>> members;  // sorted device indices per slot
  std::vector<int> head;                  // device index or -1 for a dead slot
  std::vector<int> live;                  // sorted live slots
  std::vector<ClusterId> ext;

  std::size_t k() const { return live.size(); }
};

void insert_sorted(std::vector<int>& v, int x) { v.insert(std::upper_bound(v.begin(), v.end(), x), x); }

void erase_value(std::vector<int>& v, int x) { v.erase(std::find(v.begin(), v.end(), x)); }

}  // namespace

struct ValueModel::Impl {
  std::vector<DeviceId> ids;
  std::unordered_map<DeviceId, int> index;
  std::vector<double> rel, verify_t, commit_t, gen_t, compute;
  std::vector<std::vector<double>> train_t;    // [member][head]
  std::vector<std::vector<double>> unicast_t;  // [sender][head]
  std::vector<std::vector<double>> rate;
  double broadcast_per_peer = 0.0;
  radio::SizeProfile sp;
  GameConfig cfg;
  mutable double max_u = 0.0;

  Impl(std::span<const Device> devices, const radio::LinkTable& links, const radio::SizeProfile& sizes,
       GameConfig config)
      : sp(sizes), cfg(config) {
    const auto n = devices.size();
    if (links.size() != n) throw Error("link table does not match device set");
    const auto& cp = links.channel();
    broadcast_per_peer =
        cp.broadcast_coef * (sp.block_size + sp.model_size + 2.0 * sp.msg_size) / cp.broadcast_unit_bytes;
    train_t.assign(n, std::vector<double>(n));
    unicast_t.assign(n, std::vector<double>(n));
    rate.assign(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = devices[i];
      if (index.contains(d.id)) throw Error("duplicate device id " + std::to_string(d.id));
      index[d.id] = static_cast<int>(i);
      ids.push_back(d.id);
      rel.push_back(d.reliability);
      compute.push_back(links.compute(i));
      verify_t.push_back(sp.verify_cost / links.compute(i));
      commit_t.push_back(sp.commit_cost / links.compute(i));
      gen_t.push_back(sp.gen_cost / links.compute(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        rate[i][j] = i == j ? kInf : links.rate(i, j);
        if (i == j) {
          train_t[i][j] = links.train_latency(i, i, sp);
          unicast_t[i][j] = 0.0;
        } else if (links.rate(i, j) > 0.0) {
          train_t[i][j] = links.train_latency(i, j, sp);
          unicast_t[i][j] = 8.0 * sp.msg_size / links.rate(i, j);
        } else {
          train_t[i][j] = kInf;
          unicast_t[i][j] = kInf;
        }
      }
    }
  }

  std::size_t n() const { return ids.size(); }

  double penalty() const { return cfg.penalty_factor * std::max(max_u, 1e-300); }

  State from_partition(const Partition& p) const {
    if (p.assignments.size() != n()) throw Error("partition does not cover the device set");
    if (!p.well_formed()) throw Error("partition is not well formed");
    State s;
    std::unordered_map<ClusterId, int> slot;
    for (const auto& [k, head] : p.committee) {
      slot[k] = static_cast<int>(s.ext.size());
      s.ext.push_back(k);
    }
    s.members.resize(s.ext.size());
    s.head.assign(s.ext.size(), -1);
    s.cluster_of.assign(n(), -1);
    for (const auto& [d, k] : p.assignments) {
      auto it = index.find(d);
      if (it == index.end()) throw Error("partition references unknown device " + std::to_string(d));
      s.cluster_of[it->second] = slot.at(k);
      s.members[slot.at(k)].push_back(it->second);
    }
    for (auto& m : s.members) std::sort(m.begin(), m.end());
    for (const auto& [k, head] : p.committee) s.head[slot.at(k)] = index.at(head);
    for (int c = 0; c < static_cast<int>(s.ext.size()); ++c) s.live.push_back(c);
    return s;
  }

  Partition to_partition(const State& s) const {
    Partition p;
    for (std::size_t i = 0; i < n(); ++i) p.assignments[ids[i]] = s.ext[s.cluster_of[i]];
    for (int c : s.live) p.committee[s.ext[c]] = ids[s.head[c]];
    return p;
  }

  // Per-cluster latency T given the committee (heads of live slots).
  double cluster_latency(const State& s, int c, std::size_t k, double verify_excl, double commit_max) const {
    const int j = s.head[c];
    double train_max = 0.0;
    for (int i : s.members[c]) train_max = std::max(train_max, train_t[i][j]);
    double unicast = 0.0;
    for (int o : s.live) {
      if (o != c) unicast = std::max(unicast, unicast_t[s.head[o]][j]);
    }
    const double agg = sp.agg_cost * static_cast<double>(s.members[c].size()) / compute[j];
    const double chain = gen_t[j] + broadcast_per_peer * static_cast<double>(k - 1) + verify_excl +
                         commit_max + unicast;
    return train_max + agg + chain;
  }

  double welfare(const State& s, Evaluation* detail = nullptr) const {
    const auto k = s.k();
    std::vector<double> committee_rel;
    committee_rel.reserve(k);
    double v1 = 0.0, v2 = 0.0, commit_max = 0.0;
    int v1_owner = -1;
    for (int c : s.live) {
      const int j = s.head[c];
      committee_rel.push_back(rel[j]);
      commit_max = std::max(commit_max, commit_t[j]);
      if (verify_t[j] > v1) {
        v2 = v1;
        v1 = verify_t[j];
        v1_owner = c;
      } else {
        v2 = std::max(v2, verify_t[j]);
      }
    }
    const double security = secmetric::security_dft(committee_rel);
    const bool feasible = k >= 4 && k <= n();
    double total = 0.0;
    double local_max_u = 0.0;
    std::vector<std::pair<int, double>> utilities;
    for (int c : s.live) {
      const double verify_excl = (c == v1_owner) ? v2 : v1;
      const double t = cluster_latency(s, c, k, verify_excl, commit_max);
      const double u = std::isfinite(t) ? security / t : 0.0;
      local_max_u = std::max(local_max_u, u);
      utilities.emplace_back(c, u);
      if (detail) detail->latency[s.ext[c]] = t;
    }
    if (feasible) max_u = std::max(max_u, local_max_u);
    const double pen = feasible ? 0.0 : penalty();
    for (const auto& [c, u] : utilities) {
      total += u - pen;
      if (detail) detail->value[s.ext[c]] = u - pen;
    }
    if (detail) {
      detail->security = security;
      detail->feasible = feasible;
      detail->welfare = total;
    }
    return total;
  }

  int elect(const State& s, int c) const {
    const auto k = s.k();
    std::vector<double> others;
    others.reserve(k);
    double verify_max = 0.0, commit_max = 0.0;
    for (int o : s.live) {
      if (o == c) continue;
      const int j = s.head[o];
      others.push_back(rel[j]);
      verify_max = std::max(verify_max, verify_t[j]);
      commit_max = std::max(commit_max, commit_t[j]);
    }
    const secmetric::SeatEvaluator seat(others);
    const double broadcast = broadcast_per_peer * static_cast<double>(k - 1);
    int best = -1;
    double best_u = -1.0;
    for (int j : s.members[c]) {
      double train_max = 0.0;
      for (int i : s.members[c]) train_max = std::max(train_max, train_t[i][j]);
      double unicast = 0.0;
      for (int o : s.live) {
        if (o != c) unicast = std::max(unicast, unicast_t[s.head[o]][j]);
      }
      const double agg = sp.agg_cost * static_cast<double>(s.members[c].size()) / compute[j];
      const double t = train_max + agg + gen_t[j] + broadcast + verify_max +
                       std::max(commit_max, commit_t[j]) + unicast;
      const double u = std::isfinite(t) ? seat.with_candidate(rel[j]) / t : 0.0;
      if (u > best_u || (u == best_u && ids[j] < ids[best])) {
        best = j;
        best_u = u;
      }
    }
    return best;
  }

  int provisional_head(const State& s, int c) const {
    int best = s.members[c].front();
    for (int j : s.members[c]) {
      if (rel[j] > rel[best] || (rel[j] == rel[best] && ids[j] < ids[best])) best = j;
    }
    return best;
  }

  struct Undo {
    int device, from, to;
    std::vector<int> from_members, to_members;
    int from_head, to_head;
    std::vector<int> live;
  };

  Undo move(State& s, int dev, int to) const {
    const int from = s.cluster_of[dev];
    Undo u{dev, from, to, s.members[from], s.members[to], s.head[from], s.head[to], s.live};
    erase_value(s.members[from], dev);
    insert_sorted(s.members[to], dev);
    s.cluster_of[dev] = to;
    const bool from_alive = !s.members[from].empty();
    if (!from_alive) {
      s.head[from] = -1;
      erase_value(s.live, from);
    } else if (s.head[from] == dev) {
      s.head[from] = provisional_head(s, from);
    }
    // Affected clusters re-elect in ascending external id order.
    std::vector<int> affected = {to};
    if (from_alive) affected.push_back(from);
    std::sort(affected.begin(), affected.end(), [&](int a, int b) { return s.ext[a] < s.ext[b]; });
    for (int c : affected) s.head[c] = elect(s, c);
    return u;
  }

  void undo(State& s, const Undo& u) const {
    s.members[u.from] = u.from_members;
    s.members[u.to] = u.to_members;
    s.head[u.from] = u.from_head;
    s.head[u.to] = u.to_head;
    s.live = u.live;
    s.cluster_of[u.device] = u.from;
  }

  double gain(State& s, double base_welfare, int dev, int to) const {
    const auto u = move(s, dev, to);
    const double after = welfare(s);
    undo(s, u);
    return after - base_welfare;
  }

  bool is_neighbor(const State& s, int dev, int c) const {
    if (cfg.min_neighbor_rate <= 0.0) return true;
    for (int m : s.members[c]) {
      if (rate[dev][m] >= cfg.min_neighbor_rate) return true;
    }
    return false;
  }

  double tolerance(double w) const { return cfg.gain_tolerance * std::max(std::abs(w), 1e-300); }

  int slot_of(const State& s, ClusterId k) const {
    for (int c : s.live) {
      if (s.ext[c] == k) return c;
    }
    throw Error("unknown cluster " + std::to_string(k));
  }
};

ValueModel::ValueModel(std::span<const Device> devices, const radio::LinkTable& links,
                       const radio::SizeProfile& sizes, GameConfig config)
    : impl_(std::make_unique<Impl>(devices, links, sizes, config)) {}

ValueModel::~ValueModel() = default;

Evaluation ValueModel::evaluate(const Partition& p) const {
  Evaluation e;
  impl_->welfare(impl_->from_partition(p), &e);
  return e;
}

double ValueModel::cluster_value(const Partition& p, ClusterId k) const {
  if (!p.committee.contains(k)) return 0.0;  // empty cluster
  return evaluate(p).value.at(k);
}

DeviceId ValueModel::elect(const Partition& p, ClusterId k) const {
  const auto s = impl_->from_partition(p);
  return impl_->ids[impl_->elect(s, impl_->slot_of(s, k))];
}

void ValueModel::reelect_all(Partition& p) const {
  auto s = impl_->from_partition(p);
  std::vector<int> order = s.live;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return s.ext[a] < s.ext[b]; });
  for (int c : order) s.head[c] = impl_->elect(s, c);
  p = impl_->to_partition(s);
}

Partition ValueModel::apply(const Partition& p, const SwitchOp& op) const {
  auto s = impl_->from_partition(p);
  const int dev = impl_->index.at(op.device);
  const int to = impl_->slot_of(s, op.to);
  if (s.cluster_of[dev] == to) throw Error("switch source and destination coincide");
  impl_->move(s, dev, to);
  return impl_->to_partition(s);
}

double ValueModel::switch_gain(const Partition& p, DeviceId device, ClusterId to) const {
  auto s = impl_->from_partition(p);
  const int dev = impl_->index.at(device);
  const int slot = impl_->slot_of(s, to);
  if (s.cluster_of[dev] == slot) throw Error("switch source and destination coincide");
  const double base = impl_->welfare(s);
  return impl_->gain(s, base, dev, slot);
}

std::vector<ClusterId> ValueModel::neighbors(const Partition& p, DeviceId device) const {
  const auto s = impl_->from_partition(p);
  const int dev = impl_->index.at(device);
  std::vector<ClusterId> out;
  for (int c : s.live) {
    if (c != s.cluster_of[dev] && impl_->is_neighbor(s, dev, c)) out.push_back(s.ext[c]);
  }
  return out;
}

std::vector<SwitchOp> ValueModel::nash_audit(const Partition& p) const {
  auto s = impl_->from_partition(p);
  const double base = impl_->welfare(s);
  const double tol = impl_->tolerance(base);
  std::vector<SwitchOp> out;
  const std::vector<int> live = s.live;
  for (std::size_t i = 0; i < impl_->n(); ++i) {
    const int from = s.cluster_of[i];
    for (int c : live) {
      if (c == from) continue;
      const double g = impl_->gain(s, base, static_cast<int>(i), c);
      if (g > tol) out.push_back({impl_->ids[i], s.ext[from], s.ext[c], g});
    }
  }
  return out;
}

double ValueModel::penalty() const { return impl_->penalty(); }

double ValueModel::tolerance(double welfare) const { return impl_->tolerance(welfare); }

void ValueModel::set_reliabilities(const std::map<DeviceId, double>& reliability) {
  for (const auto& [id, r] : reliability) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error("reliability outside [0, 1]");
    impl_->rel.at(impl_->index.at(id)) = r;
  }
}

GameResult run_game(std::span<const Device> devices, const radio::LinkTable& links,
                    const radio::SizeProfile& sizes, GameConfig config) {
  const auto n = devices.size();
  if (n < 4) throw Error("clustering needs at least 4 devices");
  ValueModel model(devices, links, sizes, config);
  const auto& m = *model.impl_;

  std::vector<DeviceId> ids;
  for (const auto& d : devices) ids.push_back(d.id);
  State s = m.from_partition(Partition::singletons(ids));

  GameResult result;
  double w = m.welfare(s);
  result.initial_welfare = w;
  const std::size_t cap = config.max_slots ? config.max_slots : 50 * n * n;

  std::vector<std::size_t> visits(n, 0);
  std::vector<char> examined(n, 0);
  std::vector<double> last_proposal(n, 0.0);

  struct Candidate {
    int device, from;
    double gain;
  };

  for (std::size_t slot = 0;; ++slot) {
    if (slot >= cap) {
      throw Error("clustering did not converge within " + std::to_string(cap) + " slots (K=" +
                  std::to_string(s.k()) + ", welfare=" + std::to_string(w) + ")");
    }
    const double tol = m.tolerance(w);
    // target slot -> accepted candidate operation (at most one per cluster)
    std::map<int, Candidate> accepted;
    const std::vector<int> clusters = s.live;

    for (int c : clusters) {
      // Phase 1: the least-visited member proposes its best available switch.
      int cand = s.members[c].front();
      for (int i : s.members[c]) {
        if (visits[i] < visits[cand] || (visits[i] == visits[cand] && ids[i] < ids[cand])) cand = i;
      }
      ++visits[cand];
      examined[cand] = 1;

      std::vector<std::pair<double, int>> prefs;  // (gain, target)
      for (int l : clusters) {
        if (l == c || !m.is_neighbor(s, cand, l)) continue;
        const double g = m.gain(s, w, cand, l);
        if (g > tol) prefs.emplace_back(g, l);
      }
      std::sort(prefs.begin(), prefs.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return s.ext[a.second] < s.ext[b.second];
      });

      double proposed = 0.0;
      for (const auto& [g, l] : prefs) {
        if (!(g > last_proposal[cand])) break;
        // Phase 2: the target keeps the best request it has seen this slot;
        // a better one makes it regret the previous candidate.
        auto it = accepted.find(l);
        if (it == accepted.end()) {
          accepted[l] = {cand, c, g};
        } else if (g > it->second.gain) {
          it->second = {cand, c, g};
        } else {
          continue;  // occupied: try the next preference
        }
        proposed = g;
        break;
      }
      last_proposal[cand] = proposed;
    }

    if (accepted.empty()) {
      if (std::all_of(examined.begin(), examined.end(), [](char e) { return e != 0; })) {
        result.slots = slot + 1;
        break;
      }
      continue;
    }

    // Execute in ascending cluster id, re-validating each gain against the
    // state left by the previous execution.
    std::vector<std::pair<int, Candidate>> ordered(accepted.begin(), accepted.end());
    std::sort(ordered.begin(), ordered.end(),
              [&](const auto& a, const auto& b) { return s.ext[a.first] < s.ext[b.first]; });
    SlotTrace trace;
    trace.slot = slot;
    for (const auto& [l, op] : ordered) {
      if (s.cluster_of[op.device] != op.from || s.members[l].empty() || op.from == l) continue;
      const double g = m.gain(s, w, op.device, l);
      if (!(g > m.tolerance(w))) continue;
      m.move(s, op.device, l);
      const double next = m.welfare(s);
      trace.executed.push_back({ids[op.device], s.ext[op.from], s.ext[l], next - w});
      w = next;
    }
    if (!trace.executed.empty()) {
      std::fill(examined.begin(), examined.end(), 0);
      std::fill(last_proposal.begin(), last_proposal.end(), 0.0);
      trace.welfare = w;
      trace.partition_hash = sha256(serialize(m.to_partition(s)));
      result.trace.push_back(std::move(trace));
    }
  }

  result.partition = m.to_partition(s);
  result.welfare = w;
  return result;
}

}  // namespace litechain::clustering
