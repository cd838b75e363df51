/**
 * @file noise.hpp
 * @brief Reproducible Wiener increments and general-noise reduction.
 *
 * Every (seed, trajectory index, channel) triple names an independent
 * counter-based stream: the k-th 64-bit output is a SplitMix64 finaliser
 * applied to key + (k + 1) * golden_gamma. Streams can be generated in any
 * order on any thread and give bit-identical results.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace cqsim {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream key for (seed, index, channel). Channels separate independent
/// noise sources that belong to the same trajectory (e.g. V and W).
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index, std::uint64_t channel = 0) noexcept;

/// Derive an unrelated master seed, used to give two pictures of the same
/// experiment independent noise.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

/// Counter-based generator over a single stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }
  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Standard normal (Box-Muller, both variates used).
  double normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Incremental source of N(0, dt) increments for one trajectory.
class WienerStream {
 public:
  WienerStream(std::uint64_t seed, std::uint64_t trajectory_index, double dt,
               std::uint64_t channel = 0);
  double next() noexcept { return sqrt_dt_ * rng_.normal(); }
  double dt() const noexcept { return dt_; }

 private:
  CounterRng rng_;
  double dt_;
  double sqrt_dt_;
};

struct WienerPath {
  double dt = 0.0;
  std::vector<double> increments;
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;

  std::size_t n_steps() const noexcept { return increments.size(); }
  /// W at the end of the path.
  double endpoint() const noexcept;
};

/// n_steps i.i.d. N(0, dt) increments; identical arguments give identical
/// paths. Throws ValidationError for n_steps < 1 or dt <= 0.
WienerPath wiener_increments(std::uint64_t seed, std::uint64_t trajectory_index,
                             std::size_t n_steps, double dt, std::uint64_t channel = 0);

/// Drift and scale of a general diffusive noise dR = mu dt + sigma dW,
/// restricted to functions of the classical coordinate and time.
struct GeneralNoiseSpec {
  std::function<double(double z, double t)> mu = [](double, double) { return 0.0; };
  std::function<double(double z, double t)> sigma = [](double, double) { return 1.0; };

  static GeneralNoiseSpec constant(double mu, double sigma);
};

}  // namespace cqsim
