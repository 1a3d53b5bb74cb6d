#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace equiprune {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A size or dimension outside the supported range (e.g. even grid side).
struct UnsupportedSizeError : Error {
  using Error::Error;
};

/// A group element handed to a structure built for a different group.
struct WrongGroupError : Error {
  using Error::Error;
};

/// A representation kind the requested operation cannot handle.
struct UnsupportedRepError : Error {
  using Error::Error;
};

/// Instance exceeds a solver's hard size cap.
struct SizeCapError : Error {
  using Error::Error;
};

/// Basis lacks an identity element required by the operation.
struct MissingIdentityError : Error {
  using Error::Error;
};

/// Malformed or inconsistent configuration input.
struct ConfigError : Error {
  using Error::Error;
};

/// A valid configuration that exceeds the enforced resource caps.
struct CapViolationError : Error {
  using Error::Error;
};

/// Stateless 64-bit mixer used to derive independent seed streams from a
/// base seed plus stream tags. splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic uniform sampler. All randomness in the library flows
/// through this class; std::uniform_real_distribution is avoided because
/// its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double unit() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~0ULL - ~0ULL % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// FNV-1a over a byte stream; used for content hashes of serialized bases.
class Fnv1a {
 public:
  void feed(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void feed_u64(std::uint64_t v) { feed(&v, sizeof v); }
  void feed_i64(std::int64_t v) { feed(&v, sizeof v); }
  void feed_double(double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    feed_u64(bits);
  }
  std::uint64_t value() const { return h_; }

  static std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// Fixed-format float for CSV output: deterministic for identical doubles.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::string(buf);
}

/// Run fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to caller-owned slots indexed by i, so output is independent of
/// scheduling. jobs <= 1 degrades to a plain loop.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<std::size_t>(jobs, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace equiprune
