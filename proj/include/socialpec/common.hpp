#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace socialpec {

// Raised for malformed or missing input data (maps to CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation produces NaN/Inf (maps to CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or argument misuse; programming/configuration errors.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

inline bool is_finite(double v) { return std::isfinite(v); }

// FNV-1a, used for content hashes in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64; used to derive independent RNG streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Static-chunked parallel loop. Chunk boundaries depend only on (n, threads),
// so any per-chunk accumulation reduced in chunk order is deterministic for a
// fixed thread count. threads <= 1 runs inline.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t begin, std::size_t end,
                                                  std::size_t chunk)>& body) {
  if (n == 0) return;
  if (threads <= 1) {
    body(0, n, 0);
    return;
  }
  const std::size_t k = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t begin = n * c / k;
    const std::size_t end = n * (c + 1) / k;
    pool.emplace_back([&body, begin, end, c] { body(begin, end, c); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace socialpec
