#include "cqsim/noise.hpp"

#include <cmath>
#include <numbers>

#include "cqsim/errors.hpp"

namespace cqsim {

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index, std::uint64_t channel) noexcept {
  std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  k = mix64(k ^ (index + 0x3c6ef372fe94f82bULL));
  return mix64(k ^ (channel * 0xa54ff53a5f1d36f1ULL + 0x510e527fade682d1ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return mix64(mix64(seed + 0x9b05688c2b3e6c1fULL) ^ mix64(salt + 0x1f83d9abfb41bd6bULL));
}

double CounterRng::normal() noexcept {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(phi);
  has_cached_ = true;
  return r * std::cos(phi);
}

WienerStream::WienerStream(std::uint64_t seed, std::uint64_t trajectory_index, double dt,
                           std::uint64_t channel)
    : rng_(stream_key(seed, trajectory_index, channel)), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
}

double WienerPath::endpoint() const noexcept {
  double w = 0.0;
  for (double d : increments) w += d;
  return w;
}

WienerPath wiener_increments(std::uint64_t seed, std::uint64_t trajectory_index,
                             std::size_t n_steps, double dt, std::uint64_t channel) {
  if (n_steps < 1) throw ValidationError("n_steps must be >= 1");
  WienerStream stream(seed, trajectory_index, dt, channel);
  WienerPath path;
  path.dt = dt;
  path.seed = seed;
  path.trajectory_index = trajectory_index;
  path.increments.resize(n_steps);
  for (auto& d : path.increments) d = stream.next();
  return path;
}

GeneralNoiseSpec GeneralNoiseSpec::constant(double mu, double sigma) {
  GeneralNoiseSpec spec;
  spec.mu = [mu](double, double) { return mu; };
  spec.sigma = [sigma](double, double) { return sigma; };
  return spec;
}

}  // namespace cqsim
