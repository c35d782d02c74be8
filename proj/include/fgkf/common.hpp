#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace fgkf {

// Error categories; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed shapes or arity in numeric primitives.
struct ShapeError : Error {
  using Error::Error;
};

// Bad configuration keys/values or missing required settings.
struct ConfigError : Error {
  using Error::Error;
};

// Corpus files, tag inventories, caches and other data problems.
struct DataError : Error {
  using Error::Error;
};

// NaN/Inf losses or gradients, training divergence.
struct NumericError : Error {
  using Error::Error;
};

// FNV-1a over raw bytes, used for parameter freeze/isolation checks.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::span<const double> xs, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(xs.data(), xs.size() * sizeof(double), h);
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace fgkf
