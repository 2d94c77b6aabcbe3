#include "litechain/harness/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace litechain::harness {

using nlohmann::json;

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::litechain: return "litechain";
    case Scheme::flc_model: return "flc_model";
    case Scheme::flc_hash: return "flc_hash";
  }
  return "?";
}

Scheme scheme_from(const std::string& s) {
  if (s == "litechain") return Scheme::litechain;
  if (s == "flc_model") return Scheme::flc_model;
  if (s == "flc_hash") return Scheme::flc_hash;
  throw Error("unknown scheme '" + s + "' (litechain, flc_model, flc_hash)");
}

std::pair<double, double> reliability_range(const std::string& name) {
  if (name == "medium") return {0.33, 0.66};
  if (name == "high") return {0.66, 0.99};
  throw Error("unknown reliability range '" + name + "' (medium, high)");
}

namespace {

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    read(key, v, out);
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    T tmp{};
    read(key, v, tmp);
    out = tmp;
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), field(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) fail(k, "unknown field");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(field(key) + ": " + msg);
  }

 private:
  std::string field(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  void read(const char* key, const json& v, double& out) const {
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "must be finite");
  }
  void read(const char* key, const json& v, bool& out) const {
    if (!v.is_boolean()) fail(key, "expected true or false");
    out = v.get<bool>();
  }
  void read(const char* key, const json& v, std::string& out) const {
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }
  void read(const char* key, const json& v, int& out) const {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    out = v.get<int>();
  }
  template <typename U>
    requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
  void read(const char* key, const json& v, U& out) const {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(key, "expected a non-negative integer");
    }
    out = v.get<U>();
  }
  void read(const char* key, const json& v, std::vector<double>& out) const {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void read(const char* key, const json& v, std::vector<std::uint32_t>& out) const {
    if (!v.is_array()) fail(key, "expected an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || (!e.is_number_unsigned() && e.get<std::int64_t>() < 0)) {
        fail(key, "expected an array of non-negative integers");
      }
      out.push_back(e.get<std::uint32_t>());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void section(Section& parent, const char* key, F&& body) {
  if (!parent.has(key)) return;
  auto s = parent.child(key);
  body(s);
  s.finish();
}

// Wraps a module validator so its message is tied to the section it checks.
template <typename F>
void checked(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void Scenario::validate() const {
  auto bad = [](const std::string& f, const std::string& m) { throw ConfigError(f + ": " + m); };
  if (devices < 4) bad("devices", "at least 4 devices are needed for a BFT committee");
  if (!(area > 0.0)) bad("area", "must be > 0");
  if (compute_tiers.empty()) bad("compute_tiers", "needs at least one tier");
  for (double c : compute_tiers) {
    if (!(c > 0.0)) bad("compute_tiers", "capacities must be > 0");
  }
  if (!(tx_power > 0.0)) bad("tx_power", "must be > 0");
  if (!(reliability_low >= 0.0 && reliability_low <= reliability_high && reliability_high <= 1.0)) {
    bad("reliability", "needs 0 <= low <= high <= 1");
  }
  checked("channel", [&] { channel.validate(); });
  checked("sizes", [&] { sizes.validate(); });
  if (sizes.block_size < 1.0) bad("sizes.block_size", "must be at least one byte");
  if (data.classes < 2) bad("data.classes", "needs at least 2 classes");
  if (data.csv.empty() && (data.dim == 0 || data.samples == 0)) bad("data", "dim and samples must be >= 1");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) bad("data.test_fraction", "must be in (0, 1)");
  if (!(data.dirichlet_alpha > 0.0)) bad("data.dirichlet_alpha", "must be > 0");
  if (!(data.spread > 0.0) || !(data.center_scale > 0.0)) bad("data", "spread and center_scale must be > 0");
  if (model.kind == fl::ModelKind::mlp && model.hidden == 0) bad("model.hidden", "mlp needs hidden >= 1");
  if (!(fl.learning_rate >= 0.0)) bad("fl.learning_rate", "must be >= 0");
  if (fl.batch == 0) bad("fl.batch", "must be >= 1");
  if (fl.steps == 0 && fl.epochs == 0) bad("fl", "steps or epochs must be >= 1");
  if (protocol.chi == 0) bad("protocol.chi", "must be >= 1");
  if (protocol.accuracy_threshold && !(*protocol.accuracy_threshold >= 0.0 && *protocol.accuracy_threshold <= 1.0)) {
    bad("protocol.accuracy_threshold", "must be in [0, 1]");
  }
  if (protocol.staleness_base && !(*protocol.staleness_base > 0.0)) bad("protocol.staleness_base", "must be > 0");
  if (!(protocol.staleness_exp >= 0.0)) bad("protocol.staleness_exp", "must be >= 0");
  if (protocol.verify_sample == 0) bad("protocol.verify_sample", "must be >= 1");
  if (!(protocol.reputation_floor >= 0.0 && protocol.reputation_floor <= protocol.reputation_ceiling &&
        protocol.reputation_ceiling <= 1.0)) {
    bad("protocol", "needs 0 <= reputation_floor <= reputation_ceiling <= 1");
  }
  if (!(protocol.reputation_prior >= 0.0 && protocol.reputation_prior <= 1.0)) {
    bad("protocol.reputation_prior", "must be in [0, 1]");
  }
  if (protocol.max_update_attempts < 1) bad("protocol.max_update_attempts", "must be >= 1");
  if (scheme != Scheme::litechain && protocol.offchain_verify.value_or(false)) {
    bad("protocol.offchain_verify", "one-tier schemes have no off-chain verification step");
  }
  checked("attack", [&] { attack.validate(data.classes); });
  if (!(stop.target_accuracy > 0.0 && stop.target_accuracy <= 1.0)) bad("stop.target_accuracy", "must be in (0, 1]");
  if (!(grid_step > 0.0)) bad("grid_step", "must be > 0");
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  Section root(j, "");
  root.get("name", s.name);
  if (root.has("scheme")) {
    std::string v;
    root.get("scheme", v);
    try {
      s.scheme = scheme_from(v);
    } catch (const Error& e) {
      root.fail("scheme", e.what());
    }
  }
  root.get("seed", s.seed);
  root.get("devices", s.devices);
  root.get("area", s.area);
  root.get("compute_tiers", s.compute_tiers);
  root.get("tx_power", s.tx_power);
  if (root.has("reliability")) {
    const json& r = root.raw("reliability");
    if (r.is_string()) {
      try {
        std::tie(s.reliability_low, s.reliability_high) = reliability_range(r.get<std::string>());
      } catch (const Error& e) {
        root.fail("reliability", e.what());
      }
    } else if (r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number()) {
      s.reliability_low = r[0].get<double>();
      s.reliability_high = r[1].get<double>();
    } else {
      root.fail("reliability", "expected \"medium\", \"high\" or [low, high]");
    }
  }
  section(root, "channel", [&](Section& c) {
    auto& p = s.channel;
    c.get("bandwidth", p.bandwidth);
    c.get("noise_power", p.noise_power);
    c.get("antenna_gain", p.antenna_gain);
    c.get("carrier_freq", p.carrier_freq);
    c.get("pathloss_exp", p.pathloss_exp);
    c.get("light_speed", p.light_speed);
    c.get("broadcast_coef", p.broadcast_coef);
    c.get("broadcast_timeout", p.broadcast_timeout);
    c.get("broadcast_unit_bytes", p.broadcast_unit_bytes);
  });
  section(root, "sizes", [&](Section& c) {
    auto& p = s.sizes;
    c.get("model_size", p.model_size);
    c.get("block_size", p.block_size);
    c.get("msg_size", p.msg_size);
    c.get("commit_cost", p.commit_cost);
    c.get("gen_cost", p.gen_cost);
    c.get("train_cost", p.train_cost);
    c.get("agg_cost", p.agg_cost);
    c.get("verify_cost", p.verify_cost);
  });
  section(root, "data", [&](Section& c) {
    auto& d = s.data;
    c.get("csv", d.csv);
    c.get("dim", d.dim);
    c.get("classes", d.classes);
    c.get("samples", d.samples);
    c.get("center_scale", d.center_scale);
    c.get("spread", d.spread);
    c.get("test_fraction", d.test_fraction);
    c.get("dirichlet_alpha", d.dirichlet_alpha);
  });
  section(root, "model", [&](Section& c) {
    if (c.has("kind")) {
      std::string k;
      c.get("kind", k);
      if (k == "softmax_linear") {
        s.model.kind = fl::ModelKind::softmax_linear;
      } else if (k == "mlp") {
        s.model.kind = fl::ModelKind::mlp;
      } else {
        c.fail("kind", "expected \"softmax_linear\" or \"mlp\"");
      }
    }
    c.get("hidden", s.model.hidden);
    c.get("init_seed", s.model.init_seed);
  });
  section(root, "fl", [&](Section& c) {
    c.get("learning_rate", s.fl.learning_rate);
    c.get("steps", s.fl.steps);
    c.get("epochs", s.fl.epochs);
    c.get("batch", s.fl.batch);
  });
  section(root, "protocol", [&](Section& c) {
    auto& p = s.protocol;
    c.get("chi", p.chi);
    c.get("accuracy_threshold", p.accuracy_threshold);
    c.get("reward_block", p.reward_block);
    c.get("reward_vote", p.reward_vote);
    c.get("staleness_base", p.staleness_base);
    c.get("staleness_exp", p.staleness_exp);
    c.get("verify_sample", p.verify_sample);
    c.get("duplicate_check", p.duplicate_check);
    c.get("quality_check", p.quality_check);
    c.get("offchain_verify", p.offchain_verify);
    c.get("reputation_floor", p.reputation_floor);
    c.get("reputation_ceiling", p.reputation_ceiling);
    c.get("reputation_prior", p.reputation_prior);
    c.get("max_update_attempts", p.max_update_attempts);
  });
  section(root, "clustering", [&](Section& c) {
    auto& g = s.clustering;
    c.get("min_neighbor_rate", g.min_neighbor_rate);
    c.get("penalty_factor", g.penalty_factor);
    c.get("gain_tolerance", g.gain_tolerance);
    c.get("max_slots", g.max_slots);
  });
  section(root, "attack", [&](Section& c) {
    auto& a = s.attack;
    if (c.has("kind")) {
      std::string k;
      c.get("kind", k);
      try {
        a.kind = adversary::attack_kind_from(k);
      } catch (const Error& e) {
        c.fail("kind", e.what());
      }
    }
    c.get("attacker_rate", a.attacker_rate);
    c.get("replay_rate", a.replay_rate);
    c.get("flip_map", a.flip_map);
    c.get("seed", a.seed);
  });
  section(root, "stop", [&](Section& c) {
    c.get("target_accuracy", s.stop.target_accuracy);
    c.get("max_rounds", s.stop.max_rounds);
    c.get("stop_at_target", s.stop.stop_at_target);
  });
  root.get("grid_step", s.grid_step);
  root.finish();
  s.validate();
  return s;
}

json to_json(const Scenario& s) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  const auto& c = s.channel;
  const auto& z = s.sizes;
  const auto& p = s.protocol;
  return json{
      {"name", s.name},
      {"scheme", to_string(s.scheme)},
      {"seed", s.seed},
      {"devices", s.devices},
      {"area", s.area},
      {"compute_tiers", s.compute_tiers},
      {"tx_power", s.tx_power},
      {"reliability", {s.reliability_low, s.reliability_high}},
      {"channel",
       {{"bandwidth", c.bandwidth},
        {"noise_power", c.noise_power},
        {"antenna_gain", c.antenna_gain},
        {"carrier_freq", c.carrier_freq},
        {"pathloss_exp", c.pathloss_exp},
        {"light_speed", c.light_speed},
        {"broadcast_coef", c.broadcast_coef},
        {"broadcast_timeout", c.broadcast_timeout},
        {"broadcast_unit_bytes", c.broadcast_unit_bytes}}},
      {"sizes",
       {{"model_size", z.model_size},
        {"block_size", z.block_size},
        {"msg_size", z.msg_size},
        {"commit_cost", z.commit_cost},
        {"gen_cost", z.gen_cost},
        {"train_cost", z.train_cost},
        {"agg_cost", z.agg_cost},
        {"verify_cost", z.verify_cost}}},
      {"data",
       {{"csv", s.data.csv},
        {"dim", s.data.dim},
        {"classes", s.data.classes},
        {"samples", s.data.samples},
        {"center_scale", s.data.center_scale},
        {"spread", s.data.spread},
        {"test_fraction", s.data.test_fraction},
        {"dirichlet_alpha", s.data.dirichlet_alpha}}},
      {"model",
       {{"kind", s.model.kind == fl::ModelKind::mlp ? "mlp" : "softmax_linear"},
        {"hidden", s.model.hidden},
        {"init_seed", opt(s.model.init_seed)}}},
      {"fl",
       {{"learning_rate", s.fl.learning_rate},
        {"steps", s.fl.steps},
        {"epochs", s.fl.epochs},
        {"batch", s.fl.batch}}},
      {"protocol",
       {{"chi", p.chi},
        {"accuracy_threshold", opt(p.accuracy_threshold)},
        {"reward_block", p.reward_block},
        {"reward_vote", p.reward_vote},
        {"staleness_base", opt(p.staleness_base)},
        {"staleness_exp", p.staleness_exp},
        {"verify_sample", p.verify_sample},
        {"duplicate_check", opt(p.duplicate_check)},
        {"quality_check", opt(p.quality_check)},
        {"offchain_verify", opt(p.offchain_verify)},
        {"reputation_floor", p.reputation_floor},
        {"reputation_ceiling", p.reputation_ceiling},
        {"reputation_prior", p.reputation_prior},
        {"max_update_attempts", p.max_update_attempts}}},
      {"clustering",
       {{"min_neighbor_rate", s.clustering.min_neighbor_rate},
        {"penalty_factor", s.clustering.penalty_factor},
        {"gain_tolerance", s.clustering.gain_tolerance},
        {"max_slots", s.clustering.max_slots}}},
      {"attack",
       {{"kind", adversary::to_string(s.attack.kind)},
        {"attacker_rate", s.attack.attacker_rate},
        {"replay_rate", s.attack.replay_rate},
        {"flip_map", s.attack.flip_map},
        {"seed", s.attack.seed}}},
      {"stop",
       {{"target_accuracy", s.stop.target_accuracy},
        {"max_rounds", s.stop.max_rounds},
        {"stop_at_target", s.stop.stop_at_target}}},
      {"grid_step", s.grid_step},
  };
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

Scenario with_field(const Scenario& s, const std::string& path, const json& value) {
  json j = to_json(s);
  const json::json_pointer ptr("/" + [&] {
    std::string p = path;
    for (auto& ch : p) {
      if (ch == '.') ch = '/';
    }
    return p;
  }());
  const auto parent = ptr.parent_pointer();
  if (!j.contains(parent) || !j.at(parent).is_object() || !j.at(parent).contains(ptr.back())) {
    throw ConfigError(path + ": unknown field");
  }
  j[ptr] = value;
  return scenario_from_json(j);
}

}  // namespace litechain::harness
