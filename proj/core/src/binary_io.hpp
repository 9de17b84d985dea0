#pragma once

// Little-endian byte buffers shared by the dataset cache and model checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "denoiserank/error.hpp"

namespace denoiserank::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    put_raw(s);
  }

  void put_doubles(std::span<const double> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }

  // Appends an FNV-1a checksum of everything written so far.
  void seal() { put<std::uint64_t>(fnv1a(bytes_)); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::string get_string(std::size_t max_len = 1 << 20) {
    const auto n = get<std::uint64_t>();
    if (n > max_len) throw CorruptionError(what_ + ": implausible string length");
    return get_raw(n);
  }

  void get_doubles(std::span<double> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  // Guards element counts read from the file against the bytes actually left.
  void check_count(std::uint64_t count, std::size_t element_size) const {
    if (element_size != 0 && count > remaining() / element_size) {
      throw CorruptionError(what_ + ": truncated (declared size exceeds file)");
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  // Verifies the trailing checksum written by ByteWriter::seal.
  void verify_seal() {
    const std::size_t body = pos_;
    const auto stored = get<std::uint64_t>();
    if (stored != fnv1a(bytes_.first(body))) {
      throw CorruptionError(what_ + ": checksum mismatch");
    }
    if (remaining() != 0) throw CorruptionError(what_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw CorruptionError(what_ + ": truncated file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace denoiserank::detail
