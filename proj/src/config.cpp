#include "cqsim/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "cqsim/errors.hpp"

namespace cqsim {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ValidationError(where + ": " + msg);
}

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require_object(j, where);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) fail(where, "unknown key '" + item.key() + "'");
  }
}

double get_number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "must be finite");
  return v;
}

std::size_t get_count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::uint64_t get_seed(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    fail(where, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

template <class F>
void maybe(const Json& obj, const char* key, F&& f) {
  if (obj.contains(key)) f(obj.at(key));
}

TheorySpec parse_theory(const Json& j) {
  const std::string w = "theory";
  allow_keys(j, w, {"dimension", "measure", "G", "B", "z_table", "psi0", "z0"});
  TheorySpec t;
  if (!j.contains("dimension")) fail(w, "missing 'dimension'");
  t.dim = get_count(j.at("dimension"), w + ".dimension");
  try {
    require_dimension(t.dim);
  } catch (const Error& e) {
    fail(w + ".dimension", e.what());
  }
  if (!j.contains("measure")) fail(w, "missing 'measure'");
  t.family = parse_measure(j.at("measure"), t.dim);
  t.G = j.contains("G") ? parse_matrix(j.at("G"), t.dim, w + ".G") : OperatorMatrix::zero(t.dim);
  t.B = j.contains("B") ? parse_matrix(j.at("B"), t.dim, w + ".B") : OperatorMatrix::zero(t.dim);
  if (!j.contains("psi0")) fail(w, "missing 'psi0'");
  t.psi0 = parse_vector(j.at("psi0"), t.dim, w + ".psi0");
  maybe(j, "z0", [&](const Json& v) { t.z0 = get_number(v, w + ".z0"); });
  maybe(j, "z_table", [&](const Json& v) {
    if (!v.is_array()) fail(w + ".z_table", "expected an array of [z_lo, z_hi, G, B]");
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::string wk = w + ".z_table[" + std::to_string(k) + "]";
      const Json& row = v[k];
      if (row.is_object()) {
        allow_keys(row, wk, {"z_lo", "z_hi", "G", "B"});
        for (const char* key : {"z_lo", "z_hi", "G", "B"}) {
          if (!row.contains(key)) fail(wk, std::string("missing '") + key + "'");
        }
        t.z_table.push_back({get_number(row.at("z_lo"), wk + ".z_lo"), get_number(row.at("z_hi"), wk + ".z_hi"),
                             parse_matrix(row.at("G"), t.dim, wk + ".G"),
                             parse_matrix(row.at("B"), t.dim, wk + ".B")});
      } else if (row.is_array() && row.size() == 4) {
        t.z_table.push_back({get_number(row[0], wk + "[0]"), get_number(row[1], wk + "[1]"),
                             parse_matrix(row[2], t.dim, wk + "[2]"), parse_matrix(row[3], t.dim, wk + "[3]")});
      } else {
        fail(wk, "expected [z_lo, z_hi, G, B] or an object with those keys");
      }
    }
  });
  return t;
}

SimConfig parse_sim(const Json& j) {
  const std::string w = "sim";
  allow_keys(j, w, {"dt", "t_final", "n_checkpoints", "picture", "renormalize", "n_traj", "seed", "track_girsanov"});
  SimConfig s;
  maybe(j, "dt", [&](const Json& v) { s.dt = get_number(v, w + ".dt"); });
  maybe(j, "t_final", [&](const Json& v) { s.t_final = get_number(v, w + ".t_final"); });
  maybe(j, "n_checkpoints", [&](const Json& v) { s.n_checkpoints = get_count(v, w + ".n_checkpoints"); });
  maybe(j, "n_traj", [&](const Json& v) { s.n_traj = get_count(v, w + ".n_traj"); });
  maybe(j, "seed", [&](const Json& v) { s.seed = get_seed(v, w + ".seed"); });
  maybe(j, "picture", [&](const Json& v) {
    if (!v.is_string()) fail(w + ".picture", "expected \"true\" or \"linear\"");
    s.picture = picture_from_string(v.get<std::string>());
  });
  maybe(j, "renormalize", [&](const Json& v) {
    if (!v.is_boolean()) fail(w + ".renormalize", "expected a boolean");
    s.renormalize = v.get<bool>();
  });
  maybe(j, "track_girsanov", [&](const Json& v) {
    if (!v.is_boolean()) fail(w + ".track_girsanov", "expected a boolean");
    s.track_girsanov = v.get<bool>();
  });
  try {
    s.validate();
  } catch (const ValidationError& e) {
    fail(w, e.what());
  }
  return s;
}

BornSettings parse_born(const Json& j) {
  const std::string w = "experiment.born";
  allow_keys(j, w, {"epsilon", "t_final", "min_collapsed_fraction", "significance"});
  BornSettings b;
  maybe(j, "epsilon", [&](const Json& v) { b.epsilon = get_number(v, w + ".epsilon"); });
  maybe(j, "t_final", [&](const Json& v) { b.t_final = get_number(v, w + ".t_final"); });
  maybe(j, "min_collapsed_fraction",
        [&](const Json& v) { b.min_collapsed_fraction = get_number(v, w + ".min_collapsed_fraction"); });
  maybe(j, "significance", [&](const Json& v) { b.significance = get_number(v, w + ".significance"); });
  if (!(b.epsilon > 0.0 && b.epsilon < 0.5)) fail(w + ".epsilon", "must be in (0, 0.5)");
  if (b.t_final < 0.0) fail(w + ".t_final", "must be >= 0");
  if (!(b.min_collapsed_fraction >= 0.0 && b.min_collapsed_fraction <= 1.0)) {
    fail(w + ".min_collapsed_fraction", "must be in [0, 1]");
  }
  if (!(b.significance > 0.0 && b.significance < 1.0)) fail(w + ".significance", "must be in (0, 1)");
  return b;
}

EquivalenceSettings parse_equivalence(const Json& j) {
  const std::string w = "experiment.equivalence";
  allow_keys(j, w, {"n_bins", "z_lo", "z_hi", "max_tv", "min_agree_fraction"});
  EquivalenceSettings e;
  maybe(j, "n_bins", [&](const Json& v) { e.n_bins = get_count(v, w + ".n_bins"); });
  maybe(j, "z_lo", [&](const Json& v) { e.z_lo = get_number(v, w + ".z_lo"); });
  maybe(j, "z_hi", [&](const Json& v) { e.z_hi = get_number(v, w + ".z_hi"); });
  maybe(j, "max_tv", [&](const Json& v) { e.max_tv = get_number(v, w + ".max_tv"); });
  maybe(j, "min_agree_fraction", [&](const Json& v) { e.min_agree_fraction = get_number(v, w + ".min_agree_fraction"); });
  if (e.n_bins < 1) fail(w + ".n_bins", "must be >= 1");
  if (e.z_lo.has_value() != e.z_hi.has_value()) fail(w, "give both z_lo and z_hi or neither");
  if (e.z_lo && !(*e.z_hi > *e.z_lo)) fail(w, "z_hi must exceed z_lo");
  return e;
}

ZakaiSettings parse_zakai(const Json& j) {
  const std::string w = "experiment.zakai";
  allow_keys(j, w, {"a", "gain", "y_min", "y_max", "n_points", "y0_mean", "y0_var", "t_final", "dt", "n_traj",
                    "y_bins", "z_bins", "y_lo", "y_hi", "filter_t_final", "filter_dt", "filter_paths", "max_tv",
                    "max_filter_rms"});
  ZakaiSettings z;
  maybe(j, "a", [&](const Json& v) { z.a = get_number(v, w + ".a"); });
  maybe(j, "gain", [&](const Json& v) { z.gain = get_number(v, w + ".gain"); });
  maybe(j, "y_min", [&](const Json& v) { z.grid.y_min = get_number(v, w + ".y_min"); });
  maybe(j, "y_max", [&](const Json& v) { z.grid.y_max = get_number(v, w + ".y_max"); });
  maybe(j, "n_points", [&](const Json& v) { z.grid.n_points = get_count(v, w + ".n_points"); });
  maybe(j, "y0_mean", [&](const Json& v) { z.y0_mean = get_number(v, w + ".y0_mean"); });
  maybe(j, "y0_var", [&](const Json& v) { z.y0_var = get_number(v, w + ".y0_var"); });
  maybe(j, "t_final", [&](const Json& v) { z.t_final = get_number(v, w + ".t_final"); });
  maybe(j, "dt", [&](const Json& v) { z.dt = get_number(v, w + ".dt"); });
  maybe(j, "n_traj", [&](const Json& v) { z.n_traj = get_count(v, w + ".n_traj"); });
  maybe(j, "y_bins", [&](const Json& v) { z.y_bins = get_count(v, w + ".y_bins"); });
  maybe(j, "z_bins", [&](const Json& v) { z.z_bins = get_count(v, w + ".z_bins"); });
  maybe(j, "y_lo", [&](const Json& v) { z.y_lo = get_number(v, w + ".y_lo"); });
  maybe(j, "y_hi", [&](const Json& v) { z.y_hi = get_number(v, w + ".y_hi"); });
  maybe(j, "filter_t_final", [&](const Json& v) { z.filter_t_final = get_number(v, w + ".filter_t_final"); });
  maybe(j, "filter_dt", [&](const Json& v) { z.filter_dt = get_number(v, w + ".filter_dt"); });
  maybe(j, "filter_paths", [&](const Json& v) { z.filter_paths = get_count(v, w + ".filter_paths"); });
  maybe(j, "max_tv", [&](const Json& v) { z.max_tv = get_number(v, w + ".max_tv"); });
  maybe(j, "max_filter_rms", [&](const Json& v) { z.max_filter_rms = get_number(v, w + ".max_filter_rms"); });

  try {
    z.grid.validate();
    const ZakaiModel model = ZakaiModel::linear_gaussian(z.a, z.gain, z.grid, z.y0_mean, z.y0_var);
    model.check_step(z.dt);
    model.check_step(z.filter_dt);
  } catch (const ValidationError& e) {
    fail(w, e.what());
  }
  if (!(z.t_final > 0.0) || !(z.filter_t_final > 0.0)) fail(w, "t_final and filter_t_final must be > 0");
  if (z.n_traj < 2) fail(w + ".n_traj", "must be >= 2");
  if (z.y_bins < 1 || z.z_bins < 1) fail(w, "y_bins and z_bins must be >= 1");
  if (!(z.y_hi > z.y_lo)) fail(w, "y_hi must exceed y_lo");
  return z;
}

LemmaSettings parse_lemma(const Json& j) {
  const std::string w = "experiment.lemma";
  allow_keys(j, w, {"N", "M", "n_samples", "random_instances", "dims"});
  LemmaSettings l;
  maybe(j, "n_samples", [&](const Json& v) { l.n_samples = get_count(v, w + ".n_samples"); });
  maybe(j, "random_instances", [&](const Json& v) { l.random_instances = get_count(v, w + ".random_instances"); });
  maybe(j, "dims", [&](const Json& v) {
    if (!v.is_array()) fail(w + ".dims", "expected an array of dimensions");
    l.dims.clear();
    for (const auto& d : v) {
      const std::size_t n = get_count(d, w + ".dims");
      if (n < 1 || n > kMaxDim) fail(w + ".dims", "dimension out of range");
      l.dims.push_back(n);
    }
  });
  if (j.contains("N")) {
    const Json& n = j.at("N");
    if (!n.is_array() || n.empty()) fail(w + ".N", "expected a square matrix");
    l.N = parse_matrix(n, n.size(), w + ".N");
    if (!l.N->is_hermitian()) fail(w + ".N", "must be Hermitian");
  }
  if (j.contains("M")) {
    if (!l.N) fail(w + ".M", "M needs N");
    l.M = parse_matrix(j.at("M"), l.N->dim(), w + ".M");
  }
  return l;
}

}  // namespace

Complex parse_complex(const Json& j, const std::string& where) {
  if (j.is_number()) return {get_number(j, where), 0.0};
  if (j.is_array() && j.size() == 2) return {get_number(j[0], where + "[0]"), get_number(j[1], where + "[1]")};
  fail(where, "expected a number or [re, im]");
}

StateVector parse_vector(const Json& j, std::size_t dim, const std::string& where) {
  if (!j.is_array() || j.size() != dim) fail(where, "expected an array of " + std::to_string(dim) + " entries");
  StateVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = parse_complex(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

OperatorMatrix parse_matrix(const Json& j, std::size_t dim, const std::string& where) {
  if (!j.is_array() || j.size() != dim) fail(where, "expected " + std::to_string(dim) + " rows");
  OperatorMatrix m(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const std::string wr = where + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != dim) fail(wr, "expected " + std::to_string(dim) + " entries");
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = parse_complex(j[r][c], wr + "[" + std::to_string(c) + "]");
  }
  return m;
}

MeasureFamily parse_measure(const Json& j, std::size_t dim) {
  const std::string w = "theory.measure";
  require_object(j, w);
  if (!j.contains("family") || !j.at("family").is_string()) fail(w, "missing string 'family'");
  const std::string fam = j.at("family").get<std::string>();
  try {
    if (fam == "norm-linear") {
      allow_keys(j, w, {"family", "c", "c0"});
      double c = 1.0, c0 = 0.0;
      maybe(j, "c", [&](const Json& v) { c = get_number(v, w + ".c"); });
      maybe(j, "c0", [&](const Json& v) { c0 = get_number(v, w + ".c0"); });
      return MeasureFamily::norm_linear(c, c0);
    }
    if (fam == "norm-power") {
      allow_keys(j, w, {"family", "p"});
      if (!j.contains("p") || !j.at("p").is_number_integer()) fail(w + ".p", "expected an integer exponent");
      return MeasureFamily::norm_power(j.at("p").get<int>());
    }
    if (fam == "real-amplitude") {
      allow_keys(j, w, {"family"});
      return MeasureFamily::real_amplitude();
    }
    if (fam == "quadratic-form") {
      allow_keys(j, w, {"family", "T"});
      if (!j.contains("T")) fail(w, "missing 'T'");
      return MeasureFamily::quadratic_form(parse_matrix(j.at("T"), dim, w + ".T"));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    fail(w, e.what());
  }
  fail(w + ".family", "unknown family '" + fam + "'");
}

Json to_json(Complex c) { return Json::array({c.real(), c.imag()}); }

Json to_json(const StateVector& v) {
  Json out = Json::array();
  for (const auto& c : v) out.push_back(to_json(c));
  return out;
}

Json to_json(const OperatorMatrix& m) {
  Json out = Json::array();
  for (std::size_t r = 0; r < m.dim(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.dim(); ++c) row.push_back(to_json(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

TheoryDefinition TheorySpec::build() const { return TheoryDefinition::build(family, G, B, z_table); }

Json TheorySpec::to_json() const {
  Json measure{{"family", std::string(family.name())}};
  if (const auto* nl = family.get_if<NormLinear>()) {
    measure["c"] = nl->c;
    measure["c0"] = nl->c0;
  } else if (const auto* np = family.get_if<NormPower>()) {
    measure["p"] = np->p;
  } else if (const auto* qf = family.get_if<QuadraticForm>()) {
    measure["T"] = cqsim::to_json(qf->T);
  }
  Json table = Json::array();
  for (const auto& row : z_table) {
    table.push_back({row.z_lo, row.z_hi, cqsim::to_json(row.G), cqsim::to_json(row.B)});
  }
  return Json{{"dimension", dim},   {"measure", measure},
              {"G", cqsim::to_json(G)}, {"B", cqsim::to_json(B)},
              {"z_table", table},   {"psi0", cqsim::to_json(psi0)},
              {"z0", z0}};
}

const TheorySpec& RunConfig::require_theory(const std::string& command) const {
  if (!theory) throw ValidationError(command + " needs a 'theory' section");
  return *theory;
}

Json RunConfig::to_json() const {
  Json j;
  if (theory) j["theory"] = theory->to_json();
  j["sim"] = {{"dt", sim.dt},
              {"t_final", sim.t_final},
              {"n_checkpoints", sim.n_checkpoints},
              {"picture", std::string(cqsim::to_string(sim.picture))},
              {"renormalize", sim.renormalize},
              {"n_traj", sim.n_traj},
              {"seed", sim.seed},
              {"track_girsanov", sim.track_girsanov}};
  Json eq{{"n_bins", equivalence.n_bins},
          {"max_tv", equivalence.max_tv},
          {"min_agree_fraction", equivalence.min_agree_fraction}};
  if (equivalence.z_lo) {
    eq["z_lo"] = *equivalence.z_lo;
    eq["z_hi"] = *equivalence.z_hi;
  }
  Json lem{{"n_samples", lemma.n_samples}, {"random_instances", lemma.random_instances}, {"dims", lemma.dims}};
  if (lemma.N) lem["N"] = cqsim::to_json(*lemma.N);
  if (lemma.M) lem["M"] = cqsim::to_json(*lemma.M);
  j["experiment"] = {
      {"born",
       {{"epsilon", born.epsilon},
        {"t_final", born.t_final},
        {"min_collapsed_fraction", born.min_collapsed_fraction},
        {"significance", born.significance}}},
      {"equivalence", eq},
      {"zakai",
       {{"a", zakai.a},
        {"gain", zakai.gain},
        {"y_min", zakai.grid.y_min},
        {"y_max", zakai.grid.y_max},
        {"n_points", zakai.grid.n_points},
        {"y0_mean", zakai.y0_mean},
        {"y0_var", zakai.y0_var},
        {"t_final", zakai.t_final},
        {"dt", zakai.dt},
        {"n_traj", zakai.n_traj},
        {"y_bins", zakai.y_bins},
        {"z_bins", zakai.z_bins},
        {"y_lo", zakai.y_lo},
        {"y_hi", zakai.y_hi},
        {"filter_t_final", zakai.filter_t_final},
        {"filter_dt", zakai.filter_dt},
        {"filter_paths", zakai.filter_paths},
        {"max_tv", zakai.max_tv},
        {"max_filter_rms", zakai.max_filter_rms}}},
      {"lemma", lem}};
  return j;
}

RunConfig parse_config(const Json& j, std::string source) {
  allow_keys(j, "config", {"theory", "sim", "experiment"});
  RunConfig cfg;
  cfg.source = std::move(source);
  if (j.contains("theory")) {
    cfg.theory = parse_theory(j.at("theory"));
    // Building runs the full admissibility check, so a bad theory fails here.
    (void)cfg.theory->build();
  }
  if (j.contains("sim")) cfg.sim = parse_sim(j.at("sim"));
  if (j.contains("experiment")) {
    const Json& e = j.at("experiment");
    allow_keys(e, "experiment", {"born", "equivalence", "zakai", "lemma"});
    maybe(e, "born", [&](const Json& v) { cfg.born = parse_born(v); });
    maybe(e, "equivalence", [&](const Json& v) { cfg.equivalence = parse_equivalence(v); });
    maybe(e, "zakai", [&](const Json& v) { cfg.zakai = parse_zakai(v); });
    maybe(e, "lemma", [&](const Json& v) { cfg.lemma = parse_lemma(v); });
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, path);
}

}  // namespace cqsim
