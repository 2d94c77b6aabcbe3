#include "litechain/core/serialize.hpp"

#include <cmath>

#include "litechain/core/bytes.hpp"

namespace litechain {

std::vector<std::uint8_t> serialize_weights(std::span<const double> weights) {
  ByteWriter w;
  w.f64_vector(weights);
  return w.take();
}

Digest canonical_hash(std::span<const double> weights) {
  if (weights.empty()) throw Error("zero-dimension model");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) {
      throw Error("non-finite weight at index " + std::to_string(i));
    }
  }
  return sha256(serialize_weights(weights));
}

std::vector<std::uint8_t> serialize(const ModelUpdate& u) {
  ByteWriter w;
  w.f64_vector(u.weights);
  w.u32(u.owner);
  w.u64(u.round);
  w.u32(u.local_steps);
  w.digest(u.identifier);
  w.u8(u.signature_valid ? 1 : 0);
  return w.take();
}

ModelUpdate deserialize_model_update(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ModelUpdate u;
  u.weights = r.f64_vector();
  u.owner = r.u32();
  u.round = r.u64();
  u.local_steps = r.u32();
  u.identifier = r.digest();
  u.signature_valid = r.u8() != 0;
  r.expect_done();
  return u;
}

namespace {

void write_shard(ByteWriter& w, const DatasetShard& s) {
  w.u64(s.dim);
  w.f64_vector(s.features);
  w.u64(s.labels.size());
  for (auto l : s.labels) w.u32(l);
}

DatasetShard read_shard(ByteReader& r) {
  DatasetShard s;
  s.dim = r.u64();
  s.features = r.f64_vector();
  const auto n = r.u64();
  s.labels.resize(n);
  for (auto& l : s.labels) l = r.u32();
  return s;
}

}  // namespace

// Device: id u32, x f64, y f64, compute f64, tx_power f64, shard,
// reliability f64, reputation f64, role u8.
std::vector<std::uint8_t> serialize(const Device& d) {
  ByteWriter w;
  w.u32(d.id);
  w.f64(d.position.x);
  w.f64(d.position.y);
  w.f64(d.compute);
  w.f64(d.tx_power);
  write_shard(w, d.dataset);
  w.f64(d.reliability);
  w.f64(d.reputation);
  w.u8(static_cast<std::uint8_t>(d.role));
  return w.take();
}

Device deserialize_device(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Device d;
  d.id = r.u32();
  d.position.x = r.f64();
  d.position.y = r.f64();
  d.compute = r.f64();
  d.tx_power = r.f64();
  d.dataset = read_shard(r);
  d.reliability = r.f64();
  d.reputation = r.f64();
  const auto role = r.u8();
  if (role > 1) throw Error("invalid device role");
  d.role = static_cast<Role>(role);
  r.expect_done();
  return d;
}

// Partition: u64 n, n x (device u32, cluster u32) in device order, then
// u64 k, k x (cluster u32, head u32) in cluster order.
std::vector<std::uint8_t> serialize(const Partition& p) {
  ByteWriter w;
  w.u64(p.assignments.size());
  for (const auto& [d, c] : p.assignments) {
    w.u32(d);
    w.u32(c);
  }
  w.u64(p.committee.size());
  for (const auto& [c, d] : p.committee) {
    w.u32(c);
    w.u32(d);
  }
  return w.take();
}

Partition deserialize_partition(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Partition p;
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto d = r.u32();
    p.assignments[d] = r.u32();
  }
  const auto k = r.u64();
  for (std::uint64_t i = 0; i < k; ++i) {
    const auto c = r.u32();
    p.committee[c] = r.u32();
  }
  r.expect_done();
  return p;
}

}  // namespace litechain
