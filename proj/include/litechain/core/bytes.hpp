#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain {

/// Little-endian byte sink used for every canonical layout in the project.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void digest(const Digest& d);
  void bytes(std::span<const std::uint8_t> b);
  /// u64 length prefix followed by the raw bytes.
  void blob(std::span<const std::uint8_t> b);
  /// u64 length prefix followed by f64 elements.
  void f64_vector(std::span<const double> v);

  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Digest digest();
  std::vector<std::uint8_t> blob();
  std::vector<double> f64_vector();

  bool done() const { return pos_ == data_.size(); }
  /// Throws if unread bytes remain.
  void expect_done() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);
Digest digest_from_hex(std::string_view hex);

/// SHA-256 of arbitrary bytes.
Digest sha256(std::span<const std::uint8_t> bytes);

}  // namespace litechain
