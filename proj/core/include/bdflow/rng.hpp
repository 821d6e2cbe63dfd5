#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace bdflow {

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All variate transforms are implemented here rather than through
/// <random> distributions (whose algorithms are implementation-defined), so a
/// seed reproduces the same trajectory on every conforming platform:
///   uniform     53 high bits of one draw, scaled to [0, 1)
///   normal      Marsaglia polar method, second variate cached
///   exponential inversion, -log(1 - U) / rate
///   index       Lemire's multiply-shift rejection on 64-bit draws
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Stream `stream_id` of the experiment seeded with `seed`. Streams with
  /// distinct ids are seeded through SplitMix64 and do not share state.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  double normal(double mean, double std) { return mean + std * normal(); }
  double exponential(double rate);
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace bdflow
