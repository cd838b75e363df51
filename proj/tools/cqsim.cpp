// cqsim: command-line front end. Every command writes report.json (plus
// CSV tables) into <out>/<command>-<timestamp>-seed<seed>/ and prints the
// report. Exit codes: 0 all criteria pass, 1 a statistical criterion failed,
// 2 configuration or validation error.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "cqsim/config.hpp"
#include "cqsim/errors.hpp"
#include "cqsim/experiments.hpp"
#include "cqsim/zakai.hpp"

#ifndef CQSIM_VERSION
#define CQSIM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace cqsim;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::optional<std::size_t> traj;
  std::optional<double> dt;
  unsigned parallel = 0;
  bool quiet = false;
};

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct Outcome {
  Json results = Json::object();
  Json criteria = Json::array();
  std::vector<Table> tables;

  void criterion(const std::string& name, bool pass, Json detail = Json::object()) {
    criteria.push_back({{"name", name}, {"pass", pass}, {"detail", std::move(detail)}});
  }
  bool pass() const {
    for (const auto& c : criteria) {
      if (!c.at("pass").get<bool>()) return false;
    }
    return true;
  }
};

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return s.str();
}

fs::path make_run_dir(const std::string& base, const std::string& command, std::uint64_t seed) {
  const std::string stem = command + "-" + timestamp() + "-seed" + std::to_string(seed);
  fs::path dir = fs::path(base) / stem;
  for (int k = 1; fs::exists(dir); ++k) dir = fs::path(base) / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

void write_table(const fs::path& dir, const Table& t, const Json& manifest) {
  std::ofstream out(dir / (t.name + ".csv"));
  out << "# manifest " << manifest.dump() << "\n";
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << "\n" << std::setprecision(17);
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

Json checkpoint_json(const std::vector<CheckpointStat>& cps) {
  Json a = Json::array();
  for (const auto& c : cps) a.push_back({{"t", c.t}, {"mean", c.mean}, {"stderr", c.std_error}, {"n_eff", c.n_eff}});
  return a;
}

Outcome cmd_classify(const RunConfig& cfg) {
  const TheoryDefinition th = cfg.require_theory("classify").build();
  Outcome o;
  const double residual = th.max_residual(100);
  o.results = {{"family", std::string(th.family().name())},
               {"label", std::string(to_string(th.label()))},
               {"residual_max", residual}};
  o.criterion("martingale residual <= 1e-10", residual <= 1e-10, {{"residual_max", residual}});
  return o;
}

Outcome cmd_simulate(const RunConfig& cfg) {
  const TheorySpec& spec = cfg.require_theory("simulate");
  const TheoryDefinition th = spec.build();
  const CQState init = make_initial_state(th, spec.psi0, spec.z0);
  const auto ens = simulate_ensemble(th, init, cfg.sim);
  const auto steps = cfg.sim.checkpoint_steps();

  Outcome o;
  Table traj{"trajectories", {"traj", "t", "z"}, {}};
  for (std::size_t i = 0; i < th.dim(); ++i) {
    traj.header.push_back("re_psi" + std::to_string(i));
    traj.header.push_back("im_psi" + std::to_string(i));
  }
  traj.header.push_back("log_weight");
  for (const auto& tr : ens) {
    for (std::size_t c = 0; c < tr.states.size(); ++c) {
      std::vector<double> row{static_cast<double>(tr.index), tr.states[c].t, tr.states[c].z};
      for (const auto& a : tr.states[c].psi) {
        row.push_back(a.real());
        row.push_back(a.imag());
      }
      row.push_back(tr.log_weight[c]);
      traj.rows.push_back(std::move(row));
    }
  }

  Json cps = Json::array();
  for (std::size_t c = 0; c < steps.size(); ++c) {
    std::vector<double> w(ens.size());
    double zs = 0.0, zz = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      w[i] = std::exp(ens[i].log_weight[c]);
      zs += ens[i].states[c].z;
      zz += ens[i].states[c].z * ens[i].states[c].z;
      ws += w[i];
    }
    const double n = static_cast<double>(ens.size());
    cps.push_back({{"t", static_cast<double>(steps[c]) * cfg.sim.dt},
                   {"mean_z", zs / n},
                   {"var_z", zz / n - (zs / n) * (zs / n)},
                   {"mean_weight", ws / n},
                   {"n_eff", effective_sample_size(w)}});
  }
  const auto edges = default_bin_edges(spec.z0, cfg.sim.t_final);
  const auto field = weighted_density(ens, edges, cfg.sim.n_checkpoints);
  Table dens{"density", {"z_lo", "z_hi", "mass", "mass_stderr"}, {}};
  for (std::size_t b = 0; b < field.n_bins(); ++b) {
    dens.rows.push_back({edges[b], edges[b + 1], field.mass(b), field.mass_stderr(b)});
  }
  o.results = {{"label", std::string(to_string(th.label()))},
               {"checkpoints", cps},
               {"outside_mass", field.outside_mass()}};
  o.tables = {std::move(traj), std::move(dens)};
  return o;
}

Outcome cmd_born(const RunConfig& cfg, unsigned parallel) {
  const TheorySpec& spec = cfg.require_theory("born");
  const TheoryDefinition th = spec.build();
  BornConfig bc;
  bc.dt = cfg.sim.dt;
  bc.n_traj = cfg.sim.n_traj;
  bc.seed = cfg.sim.seed;
  bc.parallel = parallel;
  bc.epsilon = cfg.born.epsilon;
  bc.t_final = cfg.born.t_final;
  bc.min_collapsed_fraction = cfg.born.min_collapsed_fraction;
  const BornReport r = born_rule_test(th, spec.psi0, bc);

  Outcome o;
  Json outcomes = Json::array();
  Table tab{"outcomes", {"eigenvalue", "predicted", "count", "frequency", "collapsed_frequency"}, {}};
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    outcomes.push_back({{"eigenvalue", r.eigenvalues[i]},
                        {"eigenvector", to_json(r.outcomes[i])},
                        {"predicted", r.predicted[i]},
                        {"count", r.counts[i]},
                        {"frequency", r.frequencies[i]},
                        {"collapsed_frequency", r.collapsed_frequencies[i]}});
    tab.rows.push_back({r.eigenvalues[i], r.predicted[i], static_cast<double>(r.counts[i]), r.frequencies[i],
                        r.collapsed_frequencies[i]});
  }
  o.results = {{"outcomes", outcomes},
               {"n_traj", r.n_traj},
               {"n_collapsed", r.n_collapsed},
               {"collapsed_fraction", r.collapsed_fraction},
               {"chi_square", r.chi_square},
               {"dof", r.dof},
               {"p_value", r.p_value},
               {"epsilon", r.epsilon},
               {"t_final", r.t_final},
               {"mean_collapse_time", r.mean_collapse_time}};
  o.criterion("chi-square p-value >= significance", r.p_value >= cfg.born.significance,
              {{"p_value", r.p_value}, {"significance", cfg.born.significance}});
  o.tables = {std::move(tab)};
  return o;
}

Outcome cmd_martingale(const RunConfig& cfg) {
  const TheorySpec& spec = cfg.require_theory("martingale");
  const TheoryDefinition th = spec.build();
  SimConfig sc = cfg.sim;
  sc.picture = Picture::Linear;
  const auto r = martingale_sweep(th, make_initial_state(th, spec.psi0, spec.z0), sc);
  Outcome o;
  o.results = {{"checkpoints", checkpoint_json(r.checkpoints)}, {"max_abs_z", r.max_abs_z}, {"warnings", r.warnings}};
  o.criterion("|mean g - 1| <= 5 stderr at every checkpoint", r.pass, {{"max_abs_z", r.max_abs_z}});
  Table tab{"checkpoints", {"t", "mean_g", "stderr", "n_eff"}, {}};
  for (const auto& c : r.checkpoints) tab.rows.push_back({c.t, c.mean, c.std_error, c.n_eff});
  o.tables = {std::move(tab)};
  return o;
}

Outcome cmd_equivalence(const RunConfig& cfg) {
  const TheorySpec& spec = cfg.require_theory("equivalence");
  const TheoryDefinition th = spec.build();
  const auto& es = cfg.equivalence;
  const auto edges = es.z_lo ? uniform_edges(*es.z_lo, *es.z_hi, es.n_bins)
                             : default_bin_edges(spec.z0, cfg.sim.t_final, es.n_bins);
  const auto r = picture_equivalence_test(th, make_initial_state(th, spec.psi0, spec.z0), cfg.sim, edges);
  Outcome o;
  Json bins = Json::array();
  Table tab{"marginals", {"z_lo", "z_hi", "true_mass", "linear_mass", "max_z", "agree"}, {}};
  for (const auto& b : r.bins) {
    bins.push_back({{"bin", b.bin}, {"occupied", b.occupied}, {"agree", b.agree}, {"max_z", b.max_z}});
    tab.rows.push_back({edges[b.bin], edges[b.bin + 1], r.true_marginal[b.bin], r.linear_marginal[b.bin], b.max_z,
                        b.agree ? 1.0 : 0.0});
  }
  o.results = {{"edges", edges},
               {"true_marginal", r.true_marginal},
               {"linear_marginal", r.linear_marginal},
               {"tv_distance", r.tv_distance},
               {"bins", bins},
               {"occupied_bins", r.occupied_bins},
               {"agreeing_bins", r.agreeing_bins},
               {"agreeing_fraction", r.agreeing_fraction},
               {"linear_total_mass", r.linear_total_mass},
               {"linear_total_mass_stderr", r.linear_total_mass_stderr},
               {"n_eff", r.n_eff},
               {"true_seed", r.true_seed},
               {"linear_seed", r.linear_seed},
               {"warnings", r.warnings}};
  o.criterion("z-marginal TV distance <= max_tv", r.tv_distance <= es.max_tv,
              {{"tv_distance", r.tv_distance}, {"max_tv", es.max_tv}});
  o.criterion("agreeing fraction of occupied bins >= min_agree_fraction",
              r.agreeing_fraction >= es.min_agree_fraction,
              {{"agreeing_fraction", r.agreeing_fraction}, {"min_agree_fraction", es.min_agree_fraction}});
  o.tables = {std::move(tab)};
  return o;
}

Outcome cmd_zakai(const RunConfig& cfg, std::uint64_t seed, unsigned parallel) {
  const ZakaiSettings& zs = cfg.zakai;
  const ZakaiModel model = ZakaiModel::linear_gaussian(zs.a, zs.gain, zs.grid, zs.y0_mean, zs.y0_var);
  Outcome o;

  // Normalised Zakai filter against the Kalman-Bucy filter on shared observations.
  double mean_sq = 0.0, var_scale = 0.0, var_rel_sq = 0.0, mass_drift = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < zs.filter_paths; ++p) {
    const auto path = zakai_simulate_hidden(model, zs.filter_t_final, zs.filter_dt, derive_seed(seed, 2), p);
    const auto zf = zakai_filter(model, path.dz, zs.filter_dt, true);
    const auto kb = kalman_bucy(zs.a, zs.gain, zs.y0_mean, zs.y0_var, path.dz, zs.filter_dt);
    for (std::size_t k = 1; k < zf.t.size(); ++k) {
      const double dm = zf.mean[k] - kb.mean[k];
      mean_sq += dm * dm;
      var_scale += kb.variance[k];
      const double dv = (zf.variance[k] - kb.variance[k]) / kb.variance[k];
      var_rel_sq += dv * dv;
      ++count;
    }
    const auto unnorm = zakai_filter(model, std::vector<double>(path.dz.size(), 0.0), zs.filter_dt, false);
    mass_drift = std::max(mass_drift, std::abs(unnorm.mass.back() - 1.0) / zs.filter_t_final);
  }
  const double mean_rms = count ? std::sqrt(mean_sq / var_scale) : 0.0;
  const double var_rms = count ? std::sqrt(var_rel_sq / static_cast<double>(count)) : 0.0;

  ZakaiJointConfig jc;
  jc.t_final = zs.t_final;
  jc.dt = zs.dt;
  jc.n_traj = zs.n_traj;
  jc.seed = seed;
  jc.parallel = parallel;
  jc.y_edges = uniform_edges(zs.y_lo, zs.y_hi, zs.y_bins);
  const double zr = 4.0 * std::sqrt(zs.t_final);
  jc.z_edges = uniform_edges(-zr, zr, zs.z_bins);
  const auto r = zakai_joint_check(model, jc);
  const double g_z = r.g_stderr > 0.0 ? std::abs(r.g_mean - 1.0) / r.g_stderr : 0.0;

  o.results = {{"filter",
                {{"paths", zs.filter_paths},
                 {"mean_rms_relative", mean_rms},
                 {"variance_rms_relative", var_rms},
                 {"fokker_planck_mass_drift_per_time", mass_drift}}},
               {"joint",
                {{"y_edges", r.y_edges},
                 {"z_edges", r.z_edges},
                 {"tv_distance", r.tv_distance},
                 {"g_mean", r.g_mean},
                 {"g_stderr", r.g_stderr},
                 {"z_marginal_direct", r.z_marginal_direct},
                 {"z_marginal_linear", r.z_marginal_linear},
                 {"z_marginal_max_z", r.z_marginal_max_z},
                 {"n_eff", r.n_eff},
                 {"direct_seed", r.direct_seed},
                 {"linear_seed", r.linear_seed},
                 {"warnings", r.warnings}}}};
  o.criterion("filter mean tracks Kalman-Bucy", mean_rms <= zs.max_filter_rms, {{"rms", mean_rms}});
  o.criterion("filter variance tracks Kalman-Bucy", var_rms <= zs.max_filter_rms, {{"rms", var_rms}});
  o.criterion("mass conserved without observation coupling", mass_drift <= 1e-6, {{"drift", mass_drift}});
  o.criterion("joint histogram TV distance <= max_tv", r.tv_distance <= zs.max_tv,
              {{"tv_distance", r.tv_distance}, {"max_tv", zs.max_tv}});
  o.criterion("|mean g - 1| <= 5 stderr", g_z <= 5.0, {{"z", g_z}});
  o.criterion("z-marginals agree within 5 stderr", r.z_marginal_max_z <= 5.0, {{"max_z", r.z_marginal_max_z}});

  Table tab{"joint", {"y_lo", "y_hi", "z_lo", "z_hi", "direct", "linear"}, {}};
  const std::size_t nz = r.z_edges.size() - 1;
  for (std::size_t b = 0; b + 1 < r.y_edges.size(); ++b) {
    for (std::size_t c = 0; c < nz; ++c) {
      tab.rows.push_back({r.y_edges[b], r.y_edges[b + 1], r.z_edges[c], r.z_edges[c + 1], r.direct[b * nz + c],
                          r.linear[b * nz + c]});
    }
  }
  o.tables = {std::move(tab)};
  return o;
}

OperatorMatrix unit_spread(OperatorMatrix n) {
  const std::size_t d = n.dim();
  const Complex mean = n.trace() / static_cast<double>(d);
  OperatorMatrix dev = n - mean * OperatorMatrix::identity(d);
  double fro = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) fro += std::norm(dev(i, j));
  }
  return (1.0 / std::sqrt(fro)) * dev + mean * OperatorMatrix::identity(d);
}

Outcome cmd_lemma(const RunConfig& cfg, std::uint64_t seed) {
  const LemmaSettings& ls = cfg.lemma;
  Outcome o;
  if (ls.N) {
    const auto solved = lemma_solve(*ls.N);
    const OperatorMatrix M = ls.M ? *ls.M : (solved ? *solved : (*ls.N) * (*ls.N));
    const double v = lemma_violation(M, *ls.N, ls.n_samples, seed);
    o.results["instance"] = {{"violation", v},
                             {"saturation_gap", lemma_saturation_gap(*ls.N)},
                             {"solvable", solved.has_value()},
                             {"M", to_json(M)}};
    if (solved) o.results["instance"]["solution"] = to_json(*solved);
  }

  // Sweep: multiples of the identity must satisfy the identity, unit-spread
  // random Hermitian N must not.
  double worst_prop = 0.0, best_random = std::numeric_limits<double>::infinity();
  std::size_t disagreements = 0, instances = 0;
  Json per_dim = Json::array();
  for (std::size_t d : ls.dims) {
    CounterRng rng(stream_key(seed, d, 0x1e44a));
    double dim_worst = 0.0, dim_best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ls.random_instances; ++k) {
      const double c = 2.0 * rng.uniform() - 1.0;
      const OperatorMatrix Np = c * OperatorMatrix::identity(d);
      const auto sp = lemma_solve(Np);
      const double vp = sp ? lemma_violation(*sp, Np, ls.n_samples, seed + k) : 1.0;
      dim_worst = std::max(dim_worst, vp);
      if (!sp) ++disagreements;

      const OperatorMatrix Nr = unit_spread(random_hermitian(d, rng));
      const auto sr = lemma_solve(Nr);
      const double vr = lemma_violation(Nr * Nr, Nr, ls.n_samples, seed + k);
      dim_best = std::min(dim_best, vr);
      if (sr.has_value() != (vr <= 1e-12)) ++disagreements;
      instances += 2;
    }
    worst_prop = std::max(worst_prop, dim_worst);
    best_random = std::min(best_random, dim_best);
    per_dim.push_back({{"dim", d}, {"max_violation_proportional", dim_worst}, {"min_violation_random", dim_best}});
  }
  o.results["sweep"] = {{"per_dim", per_dim}, {"instances", instances}, {"disagreements", disagreements}};
  if (ls.random_instances > 0 && !ls.dims.empty()) {
    o.criterion("violation <= 1e-12 for N proportional to I", worst_prop <= 1e-12, {{"max", worst_prop}});
    o.criterion("violation >= 0.1 for random N", best_random >= 0.1, {{"min", best_random}});
    o.criterion("lemma_solve agrees with the violation test", disagreements == 0, {{"disagreements", disagreements}});
  }
  return o;
}

int run(const std::string& command, const Options& opt) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg;
  const bool needs_config = command != "zakai" && command != "lemma";
  if (!opt.config.empty()) {
    cfg = load_config(opt.config);
  } else if (needs_config) {
    throw ValidationError(command + " needs --config");
  }
  if (opt.seed) cfg.sim.seed = *opt.seed;
  if (opt.traj) {
    cfg.sim.n_traj = *opt.traj;
    cfg.zakai.n_traj = *opt.traj;
  }
  if (opt.dt) {
    cfg.sim.dt = *opt.dt;
    cfg.zakai.dt = *opt.dt;
  }
  cfg.sim.parallel = opt.parallel;
  cfg.sim.validate();
  if (command == "zakai") {
    ZakaiModel::linear_gaussian(cfg.zakai.a, cfg.zakai.gain, cfg.zakai.grid).check_step(cfg.zakai.dt);
    if (cfg.zakai.n_traj < 2) throw ValidationError("zakai needs at least 2 trajectories");
  }
  const std::uint64_t seed = cfg.sim.seed;

  Outcome o;
  if (command == "classify") o = cmd_classify(cfg);
  else if (command == "simulate") o = cmd_simulate(cfg);
  else if (command == "born") o = cmd_born(cfg, opt.parallel);
  else if (command == "martingale") o = cmd_martingale(cfg);
  else if (command == "equivalence") o = cmd_equivalence(cfg);
  else if (command == "zakai") o = cmd_zakai(cfg, seed, opt.parallel);
  else if (command == "lemma") o = cmd_lemma(cfg, seed);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = o.pass();
  Json manifest = {{"command", command},
                   {"config_paths", opt.config.empty() ? Json::array() : Json::array({opt.config})},
                   {"seed", seed},
                   {"version", CQSIM_VERSION},
                   {"output_dir", opt.out},
                   {"wall_clock_seconds", seconds}};
  Json report = {{"manifest", manifest},
                 {"config", cfg.to_json()},
                 {"results", o.results},
                 {"criteria", o.criteria},
                 {"pass", pass}};

  const fs::path dir = make_run_dir(opt.out, command, seed);
  {
    std::ofstream out(dir / "report.json");
    out << report.dump(2) << "\n";
  }
  for (const auto& t : o.tables) write_table(dir, t, manifest);
  if (!opt.quiet) {
    const Json summary = {{"results", o.results}, {"criteria", o.criteria}, {"pass", pass}};
    std::cout << summary.dump(2) << "\n";
  }
  std::cerr << "report written to " << (dir / "report.json").string() << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical-quantum hybrid dynamics simulator"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"classify", "Classify the theory and report the martingale residual"},
      {"simulate", "Run an ensemble and write trajectories and the binned density"},
      {"born", "Collapse statistics against the Born rule"},
      {"martingale", "Mean of g over a linear-picture ensemble"},
      {"equivalence", "Compare the true and linear pictures"},
      {"zakai", "Zakai filter checks for the linear-Gaussian model"},
      {"lemma", "M/N lemma checks"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--seed", opt.seed, "Master seed (overrides sim.seed)");
    sub->add_option("--out", opt.out, "Base output directory")->capture_default_str();
    sub->add_option("--traj", opt.traj, "Number of trajectories");
    sub->add_option("--dt", opt.dt, "Time step");
    sub->add_option("--parallel", opt.parallel, "Worker threads, 0 = all cores")->capture_default_str();
    sub->add_flag("--quiet", opt.quiet, "Do not print the report");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InconclusiveRun& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
