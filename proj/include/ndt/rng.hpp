#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace ndt {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream keyed by (seed, label).
///
/// Draw i is a pure function of (key, i), so streams with different labels
/// never share state and a stream can be copied to replay its future.
/// All distributions are implemented here rather than through <random>
/// so that sequences are identical across standard library implementations.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::string_view id)
      : key_(detail::splitmix64(detail::splitmix64(seed) ^ detail::fnv1a(id))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    return detail::splitmix64(key_ ^ detail::splitmix64(counter_++));
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; always consumes two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n) noexcept {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Derived stream, independent of this one and of its position.
  RandomStream split(std::string_view sub) const noexcept {
    RandomStream s;
    s.key_ = detail::splitmix64(key_ ^ detail::fnv1a(sub));
    return s;
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const RandomStream&, const RandomStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline RandomStream rng_stream(std::uint64_t seed, std::string_view id) { return {seed, id}; }

}  // namespace ndt
