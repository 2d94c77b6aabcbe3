#include "litechain/core/bytes.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

namespace litechain {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::digest(const Digest& d) { buf_.insert(buf_.end(), d.begin(), d.end()); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void ByteWriter::blob(std::span<const std::uint8_t> b) {
  u64(b.size());
  bytes(b);
}

void ByteWriter::f64_vector(std::span<const double> v) {
  u64(v.size());
  for (double x : v) f64(x);
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > data_.size() - pos_) throw Error("truncated record");
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint32_t ByteReader::u32() {
  auto s = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  auto s = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

Digest ByteReader::digest() {
  Digest d;
  auto s = take(d.size());
  std::copy(s.begin(), s.end(), d.begin());
  return d;
}

std::vector<std::uint8_t> ByteReader::blob() {
  const auto n = u64();
  auto s = take(n);
  return {s.begin(), s.end()};
}

std::vector<double> ByteReader::f64_vector() {
  const auto n = u64();
  if (n > (data_.size() - pos_) / 8) throw Error("truncated record");
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

void ByteReader::expect_done() const {
  if (!done()) throw Error("trailing bytes after record");
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error("odd-length hex string");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error("invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  const auto raw = from_hex(hex);
  Digest d;
  if (raw.size() != d.size()) throw Error("digest must be 32 bytes");
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.size()) {
    throw Error("SHA-256 computation failed");
  }
  return d;
}

}  // namespace litechain
