#include <doctest.h>

#include "cqsim/errors.hpp"
#include "cqsim/zakai.hpp"
#include "support/oracles.hpp"

using namespace cqsim;

namespace {

ZakaiModel zero_model(double h_slope = 0.0, double y0_var = 0.5) {
  return ZakaiModel([h_slope](double y) { return h_slope * y; }, [](double) { return 0.0; }, ZakaiGrid{}, 0.0,
                    y0_var);
}

}  // namespace

TEST_CASE("grid and step validation") {
  ZakaiGrid g;
  CHECK(g.dy() == doctest::Approx(0.05));
  CHECK(g.y(240) == doctest::Approx(6.0));
  g.n_points = 2;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  const auto m = ZakaiModel::linear_gaussian();
  CHECK_NOTHROW(m.check_step(1.25e-3));
  CHECK_THROWS_AS(m.check_step(1.3e-3), ValidationError);
  CHECK_THROWS_AS(m.check_step(0.0), ValidationError);
  auto p = m.initial_density();
  CHECK_THROWS_AS(zakai_step(m, p, 0.0, 2e-3), ValidationError);
  CHECK_THROWS_AS(ZakaiModel::linear_gaussian(1.0, 1.0, ZakaiGrid{}, 0.0, 0.0), ValidationError);
}

TEST_CASE("initial density is a unit-mass normal") {
  const auto m = ZakaiModel::linear_gaussian(1.0, 1.0, ZakaiGrid{}, 0.5, 0.3);
  const auto p = m.initial_density();
  CHECK(density_mass(m.grid(), p) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(density_mean(m.grid(), p) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(density_variance(m.grid(), p) == doctest::Approx(0.3 + 0.05 * 0.05 / 12.0).epsilon(1e-3));
}

TEST_CASE("without observation coupling the step conserves mass") {
  const auto m = zero_model(-1.0);
  const std::vector<double> dz(2000, 0.0);
  const auto tr = zakai_filter(m, dz, 1e-3, false);
  CHECK(std::abs(tr.mass.back() - 1.0) < 1e-6 * 2.0);
  for (double v : tr.final_density) CHECK(v >= 0.0);
}

TEST_CASE("Fokker-Planck moments follow the Ornstein-Uhlenbeck oracle") {
  const std::vector<double> dz(2000, 0.0);
  SUBCASE("pure diffusion: variance grows as v0 + t") {
    const auto tr = zakai_filter(zero_model(0.0, 0.3), dz, 1e-3, false);
    CHECK(tr.variance.back() == doctest::Approx(0.3 + 2.0).epsilon(5e-3));
    CHECK(std::abs(tr.mean.back()) < 1e-10);
  }
  SUBCASE("h = -y relaxes toward 1/2") {
    const auto tr = zakai_filter(zero_model(-1.0, 1.5), dz, 1e-3, false);
    for (std::size_t k = 0; k < tr.t.size(); k += 250) {
      CHECK(tr.variance[k] == doctest::Approx(oracle::ou_variance(1.0, 1.5, tr.t[k])).epsilon(5e-3));
    }
  }
}

TEST_CASE("normalised filter tracks the Kalman-Bucy oracle") {
  const auto m = ZakaiModel::linear_gaussian();
  const double dt = 2.5e-4;
  for (std::uint64_t path = 0; path < 3; ++path) {
    const auto hp = zakai_simulate_hidden(m, 2.0, dt, 50, path);
    const auto zf = zakai_filter(m, hp.dz, dt, true);
    const auto kb = oracle::kalman_bucy(1.0, 1.0, 0.0, 0.5, hp.dz, dt);
    double dm2 = 0.0, v = 0.0, dv2 = 0.0;
    for (std::size_t k = 1; k < kb.mean.size(); ++k) {
      dm2 += (zf.mean[k] - kb.mean[k]) * (zf.mean[k] - kb.mean[k]);
      v += kb.var[k];
      const double rel = (zf.variance[k] - kb.var[k]) / kb.var[k];
      dv2 += rel * rel;
    }
    CHECK(std::sqrt(dm2 / v) < 0.02);
    CHECK(std::sqrt(dv2 / static_cast<double>(kb.mean.size() - 1)) < 0.02);
    for (double mass : zf.mass) CHECK(mass > 0.0);
  }
  // the library's reference filter agrees with the oracle
  const auto hp = zakai_simulate_hidden(m, 1.0, dt, 51, 0);
  const auto lib = kalman_bucy(1.0, 1.0, 0.0, 0.5, hp.dz, dt);
  const auto ref = oracle::kalman_bucy(1.0, 1.0, 0.0, 0.5, hp.dz, dt);
  CHECK(lib.mean.back() == doctest::Approx(ref.mean.back()).epsilon(1e-12));
  CHECK(lib.variance.back() == doctest::Approx(ref.var.back()).epsilon(1e-12));
}

TEST_CASE("hidden process") {
  SUBCASE("h = 0, f = 0: Y and Z are independent Wiener paths") {
    const ZakaiModel m([](double) { return 0.0; }, [](double) { return 0.0; }, ZakaiGrid{}, 0.0, 1e-12);
    std::vector<double> y, z;
    for (std::uint64_t i = 0; i < 4000; ++i) {
      const auto p = zakai_simulate_hidden(m, 1.0, 1e-2, 60, i);
      y.push_back(p.y.back());
      z.push_back(p.z.back());
    }
    const double crit = 1.63 / std::sqrt(4000.0);
    CHECK(oracle::ks_distance(y, oracle::normal_cdf) < crit);
    CHECK(oracle::ks_distance(z, oracle::normal_cdf) < crit);
    double cov = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) cov += y[i] * z[i];
    CHECK(std::abs(cov / 4000.0) < 5.0 / std::sqrt(4000.0));
  }
  SUBCASE("h = -y: stationary variance 1/2") {
    const auto m = ZakaiModel::linear_gaussian(1.0, 0.0, ZakaiGrid{}, 0.0, 0.5);
    std::vector<double> y;
    for (std::uint64_t i = 0; i < 20000; ++i) y.push_back(zakai_simulate_hidden(m, 3.0, 1e-2, 61, i).y.back());
    // Euler-Maruyama stationary variance is 1 / (2 - dt)
    CHECK(oracle::moments(y).var == doctest::Approx(0.5).epsilon(0.05));
  }
  SUBCASE("f = y: observation increments covary with Y") {
    const auto m = ZakaiModel::linear_gaussian();
    const auto p = zakai_simulate_hidden(m, 50.0, 1e-2, 62, 0);
    double cov = 0.0;
    for (std::size_t k = 0; k < p.dz.size(); ++k) cov += p.y[k] * p.dz[k];
    CHECK(cov > 0.0);
  }
}

TEST_CASE("too narrow a grid reports mass leakage") {
  const ZakaiModel m([](double) { return 0.0; }, [](double) { return 0.0; }, ZakaiGrid{-1.0, 1.0, 41}, 0.0, 0.5);
  auto p = m.initial_density();
  std::vector<double> scratch;
  CHECK_THROWS_AS(zakai_step(m, p, 0.0, 1e-3, scratch), NumericalError);
}

TEST_CASE("joint check: f = 0 factorises and both histograms are normalised") {
  const ZakaiModel m([](double y) { return -y; }, [](double) { return 0.0; });
  ZakaiJointConfig c;
  c.t_final = 0.5;
  c.dt = 1e-3;
  c.n_traj = 4000;
  c.seed = 70;
  c.y_edges = {-3, -1, 0, 1, 3};
  c.z_edges = {-3, -1, 0, 1, 3};
  const auto r = zakai_joint_check(m, c);
  double sd = 0.0, sl = 0.0;
  for (double v : r.direct) sd += v;
  for (double v : r.linear) sl += v;
  CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sl == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.g_mean == doctest::Approx(1.0).epsilon(1e-9));
  // linear estimate equals the product of its marginals; direct agrees within 5 stderr
  const std::size_t nz = 4;
  for (std::size_t b = 0; b < 4; ++b) {
    double py = 0.0;
    for (std::size_t k = 0; k < nz; ++k) py += r.linear[b * nz + k];
    for (std::size_t k = 0; k < nz; ++k) {
      const double prod = py * r.z_marginal_linear[k];
      CHECK(r.linear[b * nz + k] == doctest::Approx(prod).epsilon(1e-9));
      const double se = std::sqrt(prod * (1.0 - prod) / 4000.0) + std::sqrt(r.z_marginal_linear[k] * (1.0 - r.z_marginal_linear[k]) / 4000.0) * py;
      CHECK(std::abs(r.direct[b * nz + k] - prod) <= 5.0 * se);
    }
  }
}

TEST_CASE("joint check: linear-Gaussian model, small ensemble") {
  const auto m = ZakaiModel::linear_gaussian();
  ZakaiJointConfig c;
  c.t_final = 1.0;
  c.dt = 1e-3;
  c.n_traj = 4000;
  c.seed = 71;
  for (int k = 0; k <= 6; ++k) c.y_edges.push_back(-3.0 + k);
  for (int k = 0; k <= 6; ++k) c.z_edges.push_back(-4.0 + 8.0 * k / 6.0);
  const auto r = zakai_joint_check(m, c);
  CHECK(std::abs(r.g_mean - 1.0) <= 5.0 * r.g_stderr);
  CHECK(r.z_marginal_max_z <= 5.0);
  CHECK(r.tv_distance < 0.1);
  CHECK(r.direct_seed != r.linear_seed);
  CHECK_THROWS_AS(zakai_joint_check(m, ZakaiJointConfig{}), ValidationError);
}
