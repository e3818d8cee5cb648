#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace h2r {

// xoshiro256** seeded through splitmix64. The distributions are defined
// here rather than via std::*_distribution so seeded sequences are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);
// Inverse of hex64; throws FormatError unless given 16 lowercase hex digits.
std::uint64_t parse_hex64(std::string_view text);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);
double parse_double(std::string_view token);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::byte> read_binary_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_binary_file(const std::filesystem::path& path,
                       std::span<const std::byte> bytes);

// Little-endian append/read helpers for the binary formats.
class ByteWriter {
 public:
  void put_bytes(std::span<const std::byte> bytes);
  void put_raw(std::string_view text);
  void put_u8(std::uint8_t v);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_string(std::string_view text);  // u32 length + bytes
  const std::vector<std::byte>& bytes() const { return buf_; }
  std::vector<std::byte> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::byte> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::span<const std::byte> get_bytes(std::size_t n);
  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  double get_f64();
  std::string get_string();
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers write into pre-sized slots so the
// result is independent of the thread count. The first exception thrown
// (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace h2r
