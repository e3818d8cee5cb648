#include "h2r/util.hpp"

#include <atomic>
#include <bit>
#include <cctype>
#include <cstdio>
#include <limits>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "h2r/error.hpp"

namespace h2r {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::index: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::as_bytes(std::span(text.data(), text.size())));
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(std::string_view s) {
  if (s.size() != 16) throw FormatError("expected 16 hex digits, got '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (const char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw FormatError("bad hex digit in '" + std::string(s) + "'");
  }
  return v;
}


std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view token) {
  // from_chars does not accept a leading '+' or the spelling "NaN" variants
  // produced by other tools, so normalise the common cases first.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    std::string lower(token);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "nan" || lower == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw FormatError("not a number: '" + std::string(token) + "'");
  }
  return value;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::byte> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> data(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("short read on " + path.string());
  return data;
}

namespace {

void write_atomically(const std::filesystem::path& path, const char* data,
                      std::size_t size) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_atomically(path, text.data(), text.size());
}

void write_binary_file(const std::filesystem::path& path,
                       std::span<const std::byte> bytes) {
  write_atomically(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void ByteWriter::put_bytes(std::span<const std::byte> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::put_raw(std::string_view text) {
  put_bytes(std::as_bytes(std::span(text.data(), text.size())));
}

void ByteWriter::put_u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }

void ByteWriter::put_u32(std::uint32_t v) {
  put_bytes(std::as_bytes(std::span(&v, 1)));
}

void ByteWriter::put_u64(std::uint64_t v) {
  put_bytes(std::as_bytes(std::span(&v, 1)));
}

void ByteWriter::put_f64(double v) { put_bytes(std::as_bytes(std::span(&v, 1))); }

void ByteWriter::put_string(std::string_view text) {
  put_u32(static_cast<std::uint32_t>(text.size()));
  put_raw(text);
}

std::span<const std::byte> ByteReader::get_bytes(std::size_t n) {
  if (n > remaining()) throw FormatError("truncated record");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::get_u8() { return static_cast<std::uint8_t>(get_bytes(1)[0]); }

std::uint32_t ByteReader::get_u32() {
  std::uint32_t v;
  std::memcpy(&v, get_bytes(4).data(), 4);
  return v;
}

std::uint64_t ByteReader::get_u64() {
  std::uint64_t v;
  std::memcpy(&v, get_bytes(8).data(), 8);
  return v;
}

double ByteReader::get_f64() {
  double v;
  std::memcpy(&v, get_bytes(8).data(), 8);
  return v;
}

std::string ByteReader::get_string() {
  const auto n = get_u32();
  auto raw = get_bytes(n);
  return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (i < err_index) {
              err_index = i;
              err = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace h2r
