#include "litechain/consensus/ledger.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "litechain/core/bytes.hpp"

namespace litechain::consensus {
namespace {

void write_header(ByteWriter& w, const Block& b) {
  w.u64(b.height);
  w.u8(static_cast<std::uint8_t>(b.kind));
  w.digest(b.prev_hash);
  w.digest(b.model_id);
  w.u32(b.proposer);
  w.u32(b.cluster);
  w.u64(b.round);
  w.u64(b.participation.size());
  for (const auto& p : b.participation) {
    w.u32(p.device);
    w.u64(p.samples);
    w.u8(p.verified ? 1 : 0);
  }
  w.blob(b.payload);
  w.f64(b.timestamp);
}

BlockKind kind_from(std::uint8_t v) {
  if (v > 3) throw Error("unknown block kind " + std::to_string(v));
  return static_cast<BlockKind>(v);
}

BlockKind kind_from(std::string_view s) {
  for (std::uint8_t v = 0; v <= 3; ++v) {
    if (to_string(static_cast<BlockKind>(v)) == s) return static_cast<BlockKind>(v);
  }
  throw Error("unknown block kind '" + std::string(s) + "'");
}

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  // from_chars for double is missing from older libstdc++ releases.
  const std::string copy(s);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) throw Error("bad number '" + copy + "'");
  return v;
}

Block parse_block(std::string_view line) {
  const auto f = split(line, ' ');
  if (f.size() != 11) throw Error("expected 11 fields, found " + std::to_string(f.size()));
  Block b;
  b.height = parse_number<std::uint64_t>(f[0]);
  b.kind = kind_from(f[1]);
  b.prev_hash = digest_from_hex(f[2]);
  b.model_id = digest_from_hex(f[3]);
  b.proposer = parse_number<std::uint32_t>(f[4]);
  b.cluster = parse_number<std::uint32_t>(f[5]);
  b.round = parse_number<std::uint64_t>(f[6]);
  b.timestamp = parse_double(f[7]);
  if (f[8] != "-") {
    for (auto rec : split(f[8], ',')) {
      const auto parts = split(rec, ':');
      if (parts.size() != 3 || (parts[2] != "0" && parts[2] != "1")) {
        throw Error("bad participation record '" + std::string(rec) + "'");
      }
      b.participation.push_back({parse_number<std::uint32_t>(parts[0]),
                                 parse_number<std::uint64_t>(parts[1]), parts[2] == "1"});
    }
  }
  if (f[9] != "-") b.payload = from_hex(f[9]);
  b.block_hash = digest_from_hex(f[10]);
  return b;
}

}  // namespace

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::genesis: return "genesis";
    case BlockKind::model: return "model";
    case BlockKind::fragment: return "fragment";
    case BlockKind::checkpoint: return "checkpoint";
  }
  return "unknown";
}

std::vector<std::uint8_t> Block::header_bytes() const {
  ByteWriter w;
  write_header(w, *this);
  return w.take();
}

Digest Block::compute_hash() const { return sha256(header_bytes()); }

std::size_t Block::byte_size() const {
  return 8 + 1 + 32 + 32 + 4 + 4 + 8 + 8 + participation.size() * 13 + 8 + payload.size() + 8 + 32;
}

std::vector<std::uint8_t> serialize(const Block& b) {
  ByteWriter w;
  write_header(w, b);
  w.digest(b.block_hash);
  return w.take();
}

Block deserialize_block(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Block b;
  b.height = r.u64();
  b.kind = kind_from(r.u8());
  b.prev_hash = r.digest();
  b.model_id = r.digest();
  b.proposer = r.u32();
  b.cluster = r.u32();
  b.round = r.u64();
  const auto n = r.u64();
  if (n > bytes.size()) throw Error("truncated record");
  for (std::uint64_t i = 0; i < n; ++i) {
    Participation p;
    p.device = r.u32();
    p.samples = r.u64();
    p.verified = r.u8() != 0;
    b.participation.push_back(p);
  }
  b.payload = r.blob();
  b.timestamp = r.f64();
  b.block_hash = r.digest();
  r.expect_done();
  return b;
}

std::vector<std::uint8_t> Checkpoint::encode() const {
  ByteWriter w;
  w.digest(latest_model);
  w.u64(epoch);
  w.u64(reputation.size());
  for (const auto& [id, score] : reputation) {
    w.u32(id);
    w.f64(score);
  }
  return w.take();
}

Checkpoint Checkpoint::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Checkpoint c;
  c.latest_model = r.digest();
  c.epoch = r.u64();
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto id = r.u32();
    c.reputation[id] = r.f64();
  }
  r.expect_done();
  return c;
}

Ledger::Ledger(double genesis_time) {
  Block g;
  g.kind = BlockKind::genesis;
  g.timestamp = genesis_time;
  g.seal();
  written_ = g.byte_size();
  blocks_.push_back(std::move(g));
}

Ledger::Ledger(std::vector<Block> blocks, Digest anchor) : blocks_(std::move(blocks)), anchor_(anchor) {
  for (const auto& b : blocks_) {
    written_ += b.byte_size();
    if (b.kind == BlockKind::model) spent_.insert(b.model_id);
    if (b.kind == BlockKind::checkpoint) {
      try {
        const auto c = Checkpoint::decode(b.payload);
        reputation = c.reputation;
        epoch = c.epoch;
      } catch (const Error& e) {
        throw Error("malformed checkpoint at height " + std::to_string(b.height) + ": " + e.what());
      }
    }
  }
}

const Block& Ledger::append(Block b) {
  b.height = blocks_.empty() ? 0 : tip().height + 1;
  b.prev_hash = blocks_.empty() ? anchor_ : tip().block_hash;
  if (!blocks_.empty() && b.timestamp < tip().timestamp) throw Error("block timestamp goes backwards");
  b.seal();
  written_ += b.byte_size();
  if (b.kind == BlockKind::model) spent_.insert(b.model_id);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

std::vector<std::uint64_t> Ledger::duplicate_model_heights() const {
  std::set<Digest> seen;
  std::vector<std::uint64_t> out;
  for (const auto& b : blocks_) {
    if (b.kind == BlockKind::model && !seen.insert(b.model_id).second) out.push_back(b.height);
  }
  return out;
}

std::size_t Ledger::prune_below(std::uint64_t height) {
  std::size_t n = 0;
  while (n < blocks_.size() && blocks_[n].height < height) ++n;
  if (n == blocks_.size()) throw Error("prune would empty the ledger");
  if (n == 0) return 0;
  anchor_ = blocks_[n - 1].block_hash;
  blocks_.erase(blocks_.begin(), blocks_.begin() + static_cast<std::ptrdiff_t>(n));
  return n;
}

std::size_t Ledger::live_bytes() const {
  std::size_t total = 0;
  for (const auto& b : blocks_) total += b.byte_size();
  return total;
}

std::optional<std::uint64_t> Ledger::verify() const {
  Digest prev = anchor_;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    if (i > 0 && b.height != blocks_[i - 1].height + 1) return b.height;
    if (b.prev_hash != prev || b.compute_hash() != b.block_hash) return b.height;
    prev = b.block_hash;
  }
  return std::nullopt;
}

void Ledger::export_text(std::ostream& out) const {
  out << "litechain-ledger v1 base=" << blocks_.front().height << " anchor=" << to_hex(anchor_)
      << " blocks=" << blocks_.size() << '\n';
  char ts[40];
  for (const auto& b : blocks_) {
    std::snprintf(ts, sizeof ts, "%.17g", b.timestamp);
    out << b.height << ' ' << to_string(b.kind) << ' ' << to_hex(b.prev_hash) << ' ' << to_hex(b.model_id)
        << ' ' << b.proposer << ' ' << b.cluster << ' ' << b.round << ' ' << ts << ' ';
    if (b.participation.empty()) out << '-';
    for (std::size_t i = 0; i < b.participation.size(); ++i) {
      const auto& p = b.participation[i];
      out << (i ? "," : "") << p.device << ':' << p.samples << ':' << (p.verified ? 1 : 0);
    }
    out << ' ' << (b.payload.empty() ? std::string("-") : to_hex(b.payload)) << ' ' << to_hex(b.block_hash)
        << '\n';
  }
}

Ledger Ledger::import_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty ledger file");
  std::uint64_t base = 0, count = 0;
  Digest anchor{};
  {
    const auto f = split(line, ' ');
    if (f.size() != 5 || f[0] != "litechain-ledger" || f[1] != "v1" || !f[2].starts_with("base=") ||
        !f[3].starts_with("anchor=") || !f[4].starts_with("blocks=")) {
      throw Error("malformed ledger header");
    }
    try {
      base = parse_number<std::uint64_t>(f[2].substr(5));
      anchor = digest_from_hex(f[3].substr(7));
      count = parse_number<std::uint64_t>(f[4].substr(7));
    } catch (const Error& e) {
      throw Error(std::string("malformed ledger header: ") + e.what());
    }
  }
  std::vector<Block> blocks;
  while (std::getline(in, line)) {
    const auto height = base + blocks.size();
    try {
      blocks.push_back(parse_block(line));
    } catch (const Error& e) {
      throw Error("malformed block at height " + std::to_string(height) + ": " + e.what());
    }
  }
  if (blocks.size() != count) {
    throw Error("ledger declares " + std::to_string(count) + " blocks, found " + std::to_string(blocks.size()));
  }
  if (blocks.empty()) throw Error("ledger has no blocks");
  return Ledger(std::move(blocks), anchor);
}

}  // namespace litechain::consensus
