#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace mcbound {

/// SplitMix64 finalizer. Used only to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-replica random stream.
///
/// Replica r of a run seeded with s draws from mt19937_64 keyed by
/// splitmix64(splitmix64(s) ^ r), so streams are reproducible, independent of
/// the order in which replicas are scheduled, and independent of thread count.
/// Distributions come from Boost.Random, whose algorithms are fixed across
/// standard-library implementations.
class Stream {
 public:
  using engine_type = std::mt19937_64;

  Stream(std::uint64_t seed, std::uint64_t index)
      : engine_(splitmix64(splitmix64(seed) ^ index)) {}

  double uniform() { return uniform_(engine_); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double sd = 1.0) {
    return mean + sd * normal_(engine_);
  }

  /// Draw an index from a cumulative table (last entry is the total mass).
  std::size_t categorical(std::span<const double> cumulative) {
    const double u = uniform() * cumulative.back();
    std::size_t lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cumulative[mid]) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  boost::random::uniform_01<double> uniform_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace mcbound
