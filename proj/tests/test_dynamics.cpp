#include <doctest.h>

#include "cqsim/dynamics.hpp"
#include "cqsim/errors.hpp"
#include "support/oracles.hpp"

using namespace cqsim;

namespace {

const Complex I(0, 1);

TheoryDefinition standard(const OperatorMatrix& G, const OperatorMatrix& B) {
  return TheoryDefinition::build(MeasureFamily::norm_linear(), G, B);
}

const StateVector kPsi{std::sqrt(0.3), std::sqrt(0.7)};

}  // namespace

TEST_CASE("sim config validation and checkpoints") {
  SimConfig c;
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimConfig{};
  c.n_traj = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimConfig{};
  c.t_final = 1.0;
  c.dt = 1e-3;
  c.n_checkpoints = 4;
  CHECK(c.n_steps() == 1000);
  CHECK(c.checkpoint_steps() == std::vector<std::size_t>{0, 250, 500, 750, 1000});
  CHECK(picture_from_string("linear") == Picture::Linear);
  CHECK_THROWS_AS(picture_from_string("sideways"), ValidationError);
}

TEST_CASE("initial state is rescaled to g = 1") {
  const auto th = standard(OperatorMatrix::zero(2), OperatorMatrix::zero(2));
  const CQState s = make_initial_state(th, StateVector{3.0, 4.0}, 0.5);
  CHECK(s.psi.norm_squared() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.z == 0.5);
  CHECK(s.t == 0.0);
}

TEST_CASE("free evolution: B = 0, G = 0 leaves psi fixed and Z a Wiener path") {
  const auto th = standard(OperatorMatrix::zero(2), OperatorMatrix::zero(2));
  SimConfig c;
  c.t_final = 0.5;
  c.n_traj = 3;
  c.seed = 8;
  for (Picture p : {Picture::True, Picture::Linear}) {
    c.picture = p;
    const auto tr = simulate_trajectory(th, make_initial_state(th, kPsi), c, 1);
    const auto w = wiener_increments(c.seed, 1, c.n_steps(), c.dt);
    CHECK(tr.states.back().z == doctest::Approx(w.endpoint()).epsilon(1e-12));
    CHECK(max_abs_diff(tr.states.back().psi, kPsi) < 1e-15);
    for (double lw : tr.log_weight) CHECK(lw == 0.0);
  }
}

TEST_CASE("B = b I: constant force gives Z_T = 2 b T + W_T") {
  const double b = 0.4;
  const auto th = standard(OperatorMatrix::zero(2), b * OperatorMatrix::identity(2));
  SimConfig c;
  c.t_final = 1.0;
  c.seed = 2;
  const auto tr = simulate_trajectory(th, make_initial_state(th, kPsi), c, 0);
  const auto w = wiener_increments(c.seed, 0, c.n_steps(), c.dt);
  CHECK(tr.states.back().z == doctest::Approx(2 * b + w.endpoint()).epsilon(1e-12));
}

TEST_CASE("linear picture converges to the exact solution for B = b I") {
  // d psi = -b^2/2 psi dt + b psi dW has psi_T = exp(b W_T - b^2 T) psi_0
  const double b = 0.6;
  const auto th = standard(OperatorMatrix::zero(2), b * OperatorMatrix::identity(2));
  auto error = [&](double dt) {
    SimConfig c;
    c.t_final = 1.0;
    c.dt = dt;
    c.picture = Picture::Linear;
    c.n_checkpoints = 1;
    double sq = 0.0;
    for (std::uint64_t i = 0; i < 200; ++i) {
      const auto fine = wiener_increments(5, i, 4000, 2.5e-4);
      const std::size_t m = static_cast<std::size_t>(std::llround(dt / 2.5e-4));
      CQState s = make_initial_state(th, kPsi);
      for (std::size_t k = 0; k < 4000; k += m) {
        double dw = 0.0;
        for (std::size_t j = 0; j < m; ++j) dw += fine.increments[k + j];
        s = step_linear(th, s, dw, dt);
      }
      const double exact = std::exp(b * fine.endpoint() - b * b);
      sq += std::norm(s.psi[0] - exact * kPsi[0]);
    }
    return std::sqrt(sq / 200);
  };
  const double e1 = error(4e-3), e2 = error(1e-3);
  CHECK(e2 < e1);
  CHECK(e2 < 0.02);
}

TEST_CASE("true picture keeps g = 1 after every step") {
  const auto th = standard(OperatorMatrix{{0.3, 0.2}, {0.2, -0.1}}, OperatorMatrix{{0.5, 0.1}, {0.0, -0.4}});
  SimConfig c;
  c.t_final = 1.0;
  c.n_checkpoints = 20;
  const auto tr = simulate_trajectory(th, make_initial_state(th, kPsi), c, 4);
  for (const auto& s : tr.states) CHECK(s.psi.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear picture with B = 0 and G = 0 keeps g identically 1") {
  const auto th = standard(OperatorMatrix::zero(2), OperatorMatrix::zero(2));
  SimConfig c;
  c.picture = Picture::Linear;
  c.n_traj = 5;
  for (const auto& tr : simulate_ensemble(th, make_initial_state(th, kPsi), c))
    for (double lw : tr.log_weight) CHECK(lw == 0.0);
}

TEST_CASE("linear picture with B = 0 and G != 0 drifts at O(dt) under Euler-Maruyama") {
  // |(1 - iG dt) psi|^2 = 1 + dt^2 <G^2>, so log g grows like t dt <G^2>
  const OperatorMatrix G{{0, 1}, {1, 0}};
  const auto th = standard(G, OperatorMatrix::zero(2));
  SimConfig c;
  c.picture = Picture::Linear;
  c.t_final = 1.0;
  c.dt = 1e-3;
  const auto tr = simulate_trajectory(th, make_initial_state(th, kPsi), c, 0);
  CHECK(tr.log_weight.back() == doctest::Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("ensembles are independent of the thread count") {
  const auto th = standard(OperatorMatrix{{0, 0.5}, {0.5, 0}}, OperatorMatrix{{0.5, 0}, {0, -0.5}});
  SimConfig c;
  c.n_traj = 40;
  c.t_final = 0.2;
  c.picture = Picture::Linear;
  c.parallel = 1;
  const auto a = simulate_ensemble(th, make_initial_state(th, kPsi), c);
  c.parallel = 4;
  const auto b = simulate_ensemble(th, make_initial_state(th, kPsi), c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].log_weight == b[i].log_weight);
    CHECK(a[i].states.back().z == b[i].states.back().z);
    CHECK(max_abs_diff(a[i].states.back().psi, b[i].states.back().psi) == 0.0);
  }
}

TEST_CASE("Girsanov tracking in the linear picture") {
  const auto th = standard(OperatorMatrix::zero(2), OperatorMatrix{{0.5, 0}, {0, -0.5}});
  SimConfig c;
  c.picture = Picture::Linear;
  c.track_girsanov = true;
  c.dt = 1e-4;
  c.t_final = 0.1;
  c.n_checkpoints = 5;
  const auto tr = simulate_trajectory(th, make_initial_state(th, kPsi), c, 0);
  REQUIRE(tr.girsanov_log.size() == tr.log_weight.size());
  CHECK(tr.girsanov_log[0] == 0.0);
  // pathwise agreement up to the O(sqrt(dt)) discretisation gap
  CHECK(std::abs(tr.girsanov_log.back() - tr.log_weight.back()) < 5e-3);
}

TEST_CASE("non-finite states raise StepError with the failing time") {
  const auto th = standard(OperatorMatrix::zero(2), 1e150 * OperatorMatrix{{1, 0}, {0, -1}});
  SimConfig c;
  c.picture = Picture::Linear;
  c.t_final = 1.0;
  try {
    (void)simulate_trajectory(th, make_initial_state(th, kPsi), c, 0);
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.cause() == StepError::Cause::NonFinite);
    CHECK(e.time() >= 0.0);
    CHECK(e.time() < 1.0);
  }
}

TEST_CASE("initial state must satisfy g = 1") {
  const auto th = standard(OperatorMatrix::zero(2), OperatorMatrix::zero(2));
  CQState s{0.0, 0.0, StateVector{1.0, 1.0}};
  CHECK_THROWS_AS(simulate_trajectory(th, s, SimConfig{}, 0), ValidationError);
}

TEST_CASE("general noise reduction") {
  const auto th = standard(OperatorMatrix{{0, 0.3}, {0.3, 0}}, OperatorMatrix{{0.5, 0}, {0, -0.5}});
  const CQState s0 = make_initial_state(th, kPsi);
  SUBCASE("unit noise reproduces the standard step") {
    const auto red = reduce_general_noise(GeneralNoiseSpec::constant(0.0, 1.0), th);
    CQState a = s0, b = s0;
    WienerStream w(1, 0, 1e-3);
    for (int k = 0; k < 200; ++k) {
      const double dw = w.next();
      a = step_true(th, a, dw, 1e-3);
      b = step_true_general(red, b, dw, 1e-3);
    }
    CHECK(a.z == doctest::Approx(b.z).epsilon(1e-13));
    CHECK(max_abs_diff(a.psi, b.psi) < 1e-13);
  }
  SUBCASE("sigma rescales B and the drift operator still conserves g") {
    const auto red = reduce_general_noise(GeneralNoiseSpec::constant(0.2, 2.0), th);
    const auto eff = red.effective(0.0, 0.0);
    CHECK(max_abs_diff(eff.B, 2.0 * th.base().B) < 1e-15);
    CounterRng rng(stream_key(30, 0));
    for (int k = 0; k < 10; ++k) {
      const StateVector x = oracle::gaussian_state(2, rng);
      CHECK(martingale_residual(th.family(), eff.A, eff.B, x) < 1e-12 * x.norm_squared());
    }
  }
  SUBCASE("pure drift shifts Z by mu dt") {
    const auto red = reduce_general_noise(GeneralNoiseSpec::constant(0.7, 0.0), th);
    const CQState s = step_true_general(red, s0, 0.01, 1e-3);
    CHECK(s.z == doctest::Approx(0.7e-3).epsilon(1e-12));
  }
  SUBCASE("negative sigma is rejected") {
    const auto red = reduce_general_noise(GeneralNoiseSpec::constant(0.0, -1.0), th);
    CHECK_THROWS_AS(red.effective(0.0, 0.0), ValidationError);
  }
}

TEST_CASE("weighted density field") {
  WeightedDensityField f(uniform_edges(0.0, 2.0, 2), 2);
  const OperatorMatrix rho0 = OperatorMatrix::outer(StateVector{1.0, 0.0}, StateVector{1.0, 0.0});
  const OperatorMatrix rhox = 0.5 * OperatorMatrix{{1, 1}, {1, 1}};
  f.add(0.5, 1.0, rho0);
  f.add(1.5, 2.0, rhox);
  f.add(5.0, 1.0, rho0);
  f.add(0.2, 0.0, rhox);
  CHECK(f.n_samples() == 4);
  CHECK(f.mass(0) == doctest::Approx(0.25));
  CHECK(f.mass(1) == doctest::Approx(0.5));
  CHECK(f.outside_mass() == doctest::Approx(0.25));
  CHECK(f.total_mass() == doctest::Approx(1.0));
  CHECK(max_abs_diff(f.matrix(1), 0.5 * rhox) < 1e-15);
  const auto m = f.marginal();
  CHECK(m.size() == 3);
  CHECK(m[0] + m[1] + m[2] == doctest::Approx(f.total_mass()));
  CHECK(f.bin_of(2.0) == std::optional<std::size_t>(1));  // last bin is closed
  CHECK(f.bin_of(2.0001) == std::nullopt);
  CHECK(f.bin_of(1.0) == std::optional<std::size_t>(1));

  // components: Re rho_ii on the diagonal, Re rho_01 above, Im rho_01 below
  WeightedDensityField g(uniform_edges(0.0, 1.0, 1), 2);
  OperatorMatrix r{{0.5, Complex(0.1, 0.2)}, {Complex(0.1, -0.2), 0.5}};
  g.add(0.5, 1.0, r);
  CHECK(g.component(0, 1) == doctest::Approx(0.1));
  CHECK(g.component(0, 2) == doctest::Approx(0.2));

  WeightedDensityField a(uniform_edges(0.0, 2.0, 2), 2), b(uniform_edges(0.0, 2.0, 2), 2);
  a.add(0.5, 1.0, rho0);
  a.add(1.5, 2.0, rhox);
  b.add(5.0, 1.0, rho0);
  b.add(0.2, 0.0, rhox);
  a.merge(b);
  CHECK(a.mass(0) == doctest::Approx(f.mass(0)));
  CHECK(a.mass_stderr(1) == doctest::Approx(f.mass_stderr(1)));
}

TEST_CASE("summary statistics") {
  const std::vector<double> p{0.2, 0.3, 0.5}, q{0.3, 0.3, 0.4};
  CHECK(total_variation(p, q) == doctest::Approx(0.1));
  const std::vector<double> w{1.0, 1.0, 2.0};
  CHECK(effective_sample_size(w) == doctest::Approx(16.0 / 6.0));
  const auto e = default_bin_edges(1.0, 4.0, 8);
  CHECK(e.size() == 9);
  CHECK(e.front() == doctest::Approx(-7.0));
  CHECK(e.back() == doctest::Approx(9.0));
}
