#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/bundle.hpp"

namespace fusionkit::detail {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string_view what) : data_(data), what_(what) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(FormatErrorKind::truncated,
                        std::string(what_) + " truncated: expected " + std::to_string(pos_ + n) +
                            " bytes, got " + std::to_string(data_.size()),
                        pos_ + n, data_.size());
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    read(&v, sizeof v);
    return v;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t total() const { return data_.size(); }

 private:
  void read(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string_view what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fusionkit::detail
