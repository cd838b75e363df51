#include <doctest.h>

#include <set>
#include <stdexcept>

#include "cqsim/errors.hpp"
#include "cqsim/noise.hpp"
#include "cqsim/parallel.hpp"
#include "support/oracles.hpp"

using namespace cqsim;

TEST_CASE("streams are reproducible and order independent") {
  const auto a = wiener_increments(42, 7, 1000, 1e-3);
  (void)wiener_increments(42, 3, 500, 1e-3);
  const auto b = wiener_increments(42, 7, 1000, 1e-3);
  CHECK(a.increments == b.increments);

  WienerStream s(42, 7, 1e-3);
  for (std::size_t k = 0; k < 1000; ++k) REQUIRE(s.next() == a.increments[k]);

  const auto other_index = wiener_increments(42, 8, 1000, 1e-3);
  const auto other_seed = wiener_increments(43, 7, 1000, 1e-3);
  const auto other_channel = wiener_increments(42, 7, 1000, 1e-3, 1);
  CHECK(other_index.increments != a.increments);
  CHECK(other_seed.increments != a.increments);
  CHECK(other_channel.increments != a.increments);
}

TEST_CASE("stream keys do not collide over a small grid") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t s = 0; s < 20; ++s)
    for (std::uint64_t i = 0; i < 50; ++i)
      for (std::uint64_t c = 0; c < 3; ++c) keys.insert(stream_key(s, i, c));
  CHECK(keys.size() == 20 * 50 * 3);
  CHECK(derive_seed(5, 1) != derive_seed(5, 2));
  CHECK(derive_seed(5, 1) != 5);
}

TEST_CASE("uniforms lie in [0, 1) and normals pass a KS test") {
  CounterRng rng(stream_key(9, 0));
  std::vector<double> u(100000), z(100000);
  for (auto& v : u) {
    v = rng.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
  for (auto& v : z) v = rng.normal();
  const double crit = 1.63 / std::sqrt(100000.0);  // alpha = 0.01
  CHECK(oracle::ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) < crit);
  CHECK(oracle::ks_distance(z, oracle::normal_cdf) < crit);
}

TEST_CASE("wiener increments have variance dt and independent channels") {
  const double dt = 0.01;
  const auto w = wiener_increments(1, 0, 200000, dt, 0);
  const auto v = wiener_increments(1, 0, 200000, dt, 1);
  const auto m = oracle::moments(w.increments);
  CHECK(std::abs(m.mean) < 5 * m.stderr_mean);
  // var of the sample variance of N(0, dt) is 2 dt^2 / n
  CHECK(std::abs(m.var - dt) < 5 * std::sqrt(2.0 / 200000.0) * dt);
  double cov = 0.0;
  for (std::size_t k = 0; k < w.n_steps(); ++k) cov += w.increments[k] * v.increments[k];
  cov /= static_cast<double>(w.n_steps());
  CHECK(std::abs(cov) < 5 * dt / std::sqrt(200000.0));

  double sum = 0.0;
  for (double d : w.increments) sum += d;
  CHECK(w.endpoint() == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("wiener increments validate their arguments") {
  CHECK_THROWS_AS(wiener_increments(0, 0, 0, 1e-3), ValidationError);
  CHECK_THROWS_AS(wiener_increments(0, 0, 10, 0.0), ValidationError);
  CHECK_THROWS_AS(wiener_increments(0, 0, 10, -1.0), ValidationError);
}

TEST_CASE("general noise spec constant") {
  const auto spec = GeneralNoiseSpec::constant(0.3, 2.0);
  CHECK(spec.mu(1.0, 2.0) == 0.3);
  CHECK(spec.sigma(-1.0, 0.0) == 2.0);
}

TEST_CASE("parallel_for gives the same results for any thread count") {
  auto run = [](unsigned threads) {
    std::vector<double> out(257);
    parallel_for(out.size(), threads, [&](std::size_t i) {
      WienerStream s(3, i, 1e-2);
      double acc = 0.0;
      for (int k = 0; k < 100; ++k) acc += s.next();
      out[i] = acc;
    });
    return out;
  };
  const auto one = run(1);
  CHECK(run(3) == one);
  CHECK(run(8) == one);
}

TEST_CASE("parallel_for rethrows a worker exception") {
  CHECK_THROWS_AS(parallel_for(10, 1,
                               [](std::size_t i) {
                                 if (i == 4) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
