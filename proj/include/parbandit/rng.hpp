#pragma once

// Deterministic, splittable random streams.
//
// Every source of randomness in the library is a Stream keyed by a 64-bit
// value derived from a base seed and an ordered list of labels.  Draw i of a
// stream is splitmix64(key + i * 0x9e3779b97f4a7c15); labels fold into the
// key as key = splitmix64(key ^ h(label)) with h the identity for integers
// and FNV-1a for strings.  This makes every draw a pure function of
// (base seed, labels, draw index), so results do not depend on evaluation
// order, thread scheduling, or the platform's <random> implementation.
//
// Gaussians use the Marsaglia polar method (only sqrt/log, no trig), uniform
// integers use rejection sampling below the largest multiple of the bound.

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <utility>

#include <Eigen/Core>

namespace parbandit {

namespace detail {

// Finalizer from the splitmix64 generator (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t label_hash(std::uint64_t v) { return v; }
constexpr std::uint64_t label_hash(std::string_view s) { return fnv1a(s); }
constexpr std::uint64_t label_hash(const char* s) { return fnv1a(s); }
constexpr std::uint64_t label_hash(long v) { return static_cast<std::uint64_t>(v); }
constexpr std::uint64_t label_hash(int v) { return static_cast<std::uint64_t>(static_cast<long>(v)); }

}  // namespace detail

/// Folds an ordered list of labels (strings or integers) into a base seed,
/// producing the key of an independent substream.
template <typename... Labels>
constexpr std::uint64_t seed_stream(std::uint64_t base, Labels&&... labels) {
  std::uint64_t key = detail::mix64(base);
  ((key = detail::mix64(key ^ detail::label_hash(std::forward<Labels>(labels)))), ...);
  return key;
}

/// Counter-based generator over a derived key.  Cheap to construct; copies
/// are independent replays, not shared state.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  /// Independent substream; does not consume draws from this one.
  template <typename... Labels>
  Stream child(Labels&&... labels) const {
    return Stream(seed_stream(key_, std::forward<Labels>(labels)...));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return detail::mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ull); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;  // largest multiple of n
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via the polar method; the spare deviate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  Eigen::VectorXd normal_vector(Eigen::Index d) {
    Eigen::VectorXd out(d);
    for (Eigen::Index i = 0; i < d; ++i) out[i] = normal();
    return out;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace parbandit
