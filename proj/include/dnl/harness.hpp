#pragma once

// Run configuration, experiments and run directories.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dnl/barrier.hpp"
#include "dnl/io.hpp"
#include "dnl/selfsim.hpp"
#include "dnl/verify.hpp"

namespace dnl {

namespace fs = std::filesystem;

enum class Experiment { exponents, march, extract, barrier, verify_suite };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::exponents: return "exponents";
    case Experiment::march: return "march";
    case Experiment::extract: return "extract";
    case Experiment::barrier: return "barrier";
    case Experiment::verify_suite: return "verify-suite";
  }
  return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::exponents, Experiment::march, Experiment::extract, Experiment::barrier,
                 Experiment::verify_suite})
    if (s == to_string(e)) return e;
  throw ConfigError("experiment: unknown kind '" + s + "'");
}

struct DomainSpec {
  GridMode mode = GridMode::full_line;
  double R = 40.0;
  int n = 512;
  DomainPtr build(int d) const { return build_domain(mode, d, R, n); }
};

struct DatumSpec {
  std::string kind = "box";  // box, bump, zero
  double mass = 0.0;         // 0: keep the shape's own mass
  double a = -1.0, b = 1.0;  // box support
  double height = 1.0;
  double radius = 1.0;       // bump support radius
};

struct VerifySpec {
  std::vector<std::string> checks{"contraction", "reflection", "radial_monotonicity", "mass_conservation",
                                  "time_decay",  "dissipation", "energy_m",            "energy_1"};
  int refined_n = 0;  // 0: twice the reference n
  int pairs = 4;
  unsigned seed = 1;
  double reflection_point = 0.0;
  double beta_scale = 1.0;  // fault injection: scales beta seen by the checks
};

struct ExtractSpec {
  std::vector<double> k_schedule{1.0, 2.0, 4.0, 8.0};
  double t_star = 1.0;
  std::string mode = "tau_shift";
  std::string shape = "bump";
  double M = 1.0;
  DomainSpec source{GridMode::radial, 160.0, 1024};
  DomainSpec profile{GridMode::radial, 20.0, 400};
  int steps = 200;
  double t0 = 1e-3;
};

struct RunConfig {
  Experiment experiment = Experiment::march;
  ModelParams params{1, 0.5, 3.0, 1.0};
  DomainSpec domain;
  double epsilon = 0.0;  // 0: exclude the self cell
  TimeSchedule time;
  DatumSpec datum;
  double newton_tol = 1e-10;
  int max_newton = 80;
  bool exterior = true;
  ExtractSpec extract;
  BarrierOptions barrier;
  VerifySpec verify;
  std::string output = "run";
  json source;  // the document the config was read from, after overrides

  StepConfig step_config() const {
    StepConfig c;
    c.schedule = time;
    c.newton_tol = newton_tol;
    c.max_newton = max_newton;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Overrides

/// Set a dot-path key; the value is parsed as JSON when it parses, otherwise
/// taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object() && !node->is_null()) throw ConfigError("override key '" + key + "': '" + parts[i - 1] + "' is not an object");
    if (i + 1 == parts.size()) (*node)[parts[i]] = value;
    else node = &(*node)[parts[i]];
  }
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

template <class T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

inline DomainSpec parse_domain(const json& j, const std::string& path, DomainSpec d) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  d.mode = grid_mode_from_string(get_or<std::string>(j, "mode", path + ".", to_string(d.mode)));
  d.R = get_or(j, "R", path + ".", d.R);
  d.n = get_or(j, "n", path + ".", d.n);
  return d;
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::get_or;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig c;
  c.source = j;
  c.experiment = experiment_from_string(get_or<std::string>(j, "experiment", "", "march"));
  if (j.contains("params")) {
    const auto& p = j["params"];
    c.params = ModelParams(get_or(p, "d", "params.", 1), get_or(p, "s", "params.", 0.5), get_or(p, "p", "params.", 3.0),
                           get_or(p, "m", "params.", 1.0));
  }
  if (j.contains("domain")) c.domain = detail::parse_domain(j["domain"], "domain", c.domain);
  c.epsilon = get_or(j, "epsilon", "", 0.0);
  if (j.contains("time")) {
    const auto& t = j["time"];
    c.time.t0 = get_or(t, "t0", "time.", c.time.t0);
    c.time.t1 = get_or(t, "t1", "time.", c.time.t1);
    c.time.steps = get_or(t, "steps", "time.", c.time.steps);
    c.time.kind = schedule_kind_from_string(get_or<std::string>(t, "schedule", "time.", "geometric"));
    c.time.explicit_times = get_or(t, "times", "time.", std::vector<double>{});
  }
  if (j.contains("datum")) {
    const auto& d = j["datum"];
    c.datum.kind = get_or<std::string>(d, "kind", "datum.", c.datum.kind);
    c.datum.mass = get_or(d, "mass", "datum.", c.datum.mass);
    c.datum.height = get_or(d, "height", "datum.", c.datum.height);
    c.datum.radius = get_or(d, "radius", "datum.", c.datum.radius);
    if (d.contains("support")) {
      auto s = get_or(d, "support", "datum.", std::vector<double>{});
      if (s.size() != 2) throw ConfigError("datum.support: expected [a, b]");
      c.datum.a = s[0];
      c.datum.b = s[1];
    }
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    c.newton_tol = get_or(s, "newton_tol", "solver.", c.newton_tol);
    c.max_newton = get_or(s, "max_newton", "solver.", c.max_newton);
    c.exterior = get_or(s, "exterior", "solver.", c.exterior);
  }
  if (j.contains("extract")) {
    const auto& e = j["extract"];
    auto& x = c.extract;
    x.k_schedule = get_or(e, "k_schedule", "extract.", x.k_schedule);
    x.t_star = get_or(e, "t_star", "extract.", x.t_star);
    x.mode = get_or(e, "mode", "extract.", x.mode);
    x.shape = get_or(e, "shape", "extract.", x.shape);
    x.M = get_or(e, "M", "extract.", x.M);
    x.steps = get_or(e, "steps", "extract.", x.steps);
    x.t0 = get_or(e, "t0", "extract.", x.t0);
    if (e.contains("source")) x.source = detail::parse_domain(e["source"], "extract.source", x.source);
    if (e.contains("profile")) x.profile = detail::parse_domain(e["profile"], "extract.profile", x.profile);
  }
  if (j.contains("barrier")) {
    const auto& b = j["barrier"];
    c.barrier.near_samples = get_or(b, "near_samples", "barrier.", c.barrier.near_samples);
    c.barrier.far_samples = get_or(b, "far_samples", "barrier.", c.barrier.far_samples);
    c.barrier.far_span = get_or(b, "far_span", "barrier.", c.barrier.far_span);
    c.barrier.max_iterations = get_or(b, "max_iterations", "barrier.", c.barrier.max_iterations);
    c.barrier.safety = get_or(b, "safety", "barrier.", c.barrier.safety);
  }
  if (j.contains("verify")) {
    const auto& v = j["verify"];
    c.verify.checks = get_or(v, "checks", "verify.", c.verify.checks);
    c.verify.refined_n = get_or(v, "refined_n", "verify.", c.verify.refined_n);
    c.verify.pairs = get_or(v, "pairs", "verify.", c.verify.pairs);
    c.verify.seed = get_or(v, "seed", "verify.", c.verify.seed);
    c.verify.reflection_point = get_or(v, "reflection_point", "verify.", c.verify.reflection_point);
    c.verify.beta_scale = get_or(v, "beta_scale", "verify.", c.verify.beta_scale);
  }
  c.output = get_or<std::string>(j, "output", "", c.output);
  return c;
}

/// Check every module precondition before any compute. The first violated
/// one is reported with its config key.
inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); };
  try {
    c.params.validate();
  } catch (const Error& e) {
    fail("params", e.what());
  }
  try {
    if (c.experiment != Experiment::march) derive_exponents(c.params);
  } catch (const Error& e) {
    fail("params.p", e.what());
  }
  if (c.experiment == Experiment::exponents) return;
  if (!(c.newton_tol > 0.0)) fail("solver.newton_tol", "must be positive");
  if (c.max_newton < 1) fail("solver.max_newton", "must be >= 1");
  if (c.experiment != Experiment::extract) {
    try {
      auto dom = c.domain.build(c.params.d);
      if (!(c.epsilon >= 0.0 && c.epsilon < dom->h)) fail("epsilon", "must lie in [0, h)");
    } catch (const ConfigError& e) {
      if (std::string(e.what()).rfind("epsilon", 0) == 0) throw;
      fail("domain", e.what());
    }
    try {
      c.step_config().validate();
    } catch (const Error& e) {
      fail("time", e.what());
    }
    const auto& k = c.datum.kind;
    if (k != "box" && k != "bump" && k != "zero") fail("datum.kind", "expected box, bump or zero");
    if (!(c.datum.mass >= 0.0)) fail("datum.mass", "must be nonnegative");
    if (k == "box" && !(c.datum.a < c.datum.b)) fail("datum.support", "needs a < b");
    if (k == "bump" && !(c.datum.radius > 0.0)) fail("datum.radius", "must be positive");
  }
  if (c.experiment == Experiment::extract) {
    const auto& x = c.extract;
    if (x.k_schedule.empty()) fail("extract.k_schedule", "must not be empty");
    for (std::size_t i = 1; i < x.k_schedule.size(); ++i)
      if (!(x.k_schedule[i] > x.k_schedule[i - 1])) fail("extract.k_schedule", "must be strictly increasing");
    if (!(x.t_star > 0.0)) fail("extract.t_star", "must be positive");
    if (!(x.M > 0.0)) fail("extract.M", "must be positive");
    if (x.steps < 1) fail("extract.steps", "must be >= 1");
    if (!(x.t0 > 0.0 && x.t0 < x.t_star)) fail("extract.t0", "must lie in (0, t_star)");
    try {
      extraction_mode_from_string(x.mode);
    } catch (const Error& e) {
      fail("extract.mode", e.what());
    }
    if (x.shape != "box" && x.shape != "bump") fail("extract.shape", "expected box or bump");
    if (c.params.m < 1.0) fail("params.m", "Barenblatt extraction needs m >= 1");
    try {
      x.source.build(c.params.d);
      x.profile.build(c.params.d);
    } catch (const Error& e) {
      fail("extract.source", e.what());
    }
    if (x.profile.mode != GridMode::radial) fail("extract.profile.mode", "profiles live on a radial grid");
  }
  if (c.experiment == Experiment::verify_suite) {
    static const std::vector<std::string> known{"contraction", "reflection", "radial_monotonicity",
                                                "mass_conservation", "time_decay", "dissipation",
                                                "energy_m", "energy_1"};
    for (const auto& name : c.verify.checks)
      if (std::find(known.begin(), known.end(), name) == known.end()) fail("verify.checks", "unknown check '" + name + "'");
    if (c.verify.pairs < 1) fail("verify.pairs", "must be >= 1");
    if (!(c.verify.beta_scale > 0.0)) fail("verify.beta_scale", "must be positive");
    const bool needs_line = std::find(c.verify.checks.begin(), c.verify.checks.end(), "reflection") != c.verify.checks.end();
    if (needs_line && (c.params.d != 1)) fail("verify.checks", "reflection needs d = 1");
  }
}

inline RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  json doc = read_json(path);
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig c = parse_config(doc);
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Experiments

inline Field make_datum(const DatumSpec& s, const DomainPtr& dom) {
  Field u(dom);
  if (s.kind == "box") u = box_datum(dom, s.height, s.a, s.b);
  else if (s.kind == "bump") u = bump_datum(dom, s.mass > 0.0 ? s.mass : 1.0, s.radius);
  if (s.kind != "zero" && s.mass > 0.0) u = with_mass(u, s.mass);
  return u;
}

inline ExtractionConfig extraction_config(const RunConfig& c) {
  ExtractionConfig x;
  x.M = c.extract.M;
  x.k_schedule = c.extract.k_schedule;
  x.t_star = c.extract.t_star;
  x.mode = extraction_mode_from_string(c.extract.mode);
  x.shape = c.extract.shape == "box" ? DatumShape::box : DatumShape::bump;
  x.source = c.extract.source.build(c.params.d);
  x.profile_grid = c.extract.profile.build(c.params.d);
  x.solver.schedule = {ScheduleKind::geometric, c.extract.t0, c.extract.t_star, c.extract.steps, {}};
  x.solver.newton_tol = c.newton_tol;
  x.solver.max_newton = c.max_newton;
  x.exterior = c.exterior;
  return x;
}

namespace detail {

inline json reports_json(const std::vector<PropertyReport>& reps) {
  json arr = json::array();
  for (const auto& r : reps) arr.push_back(to_json(r));
  return arr;
}

/// Two boxes with random heights and supports inside [-R/4, R/4].
inline std::pair<Field, Field> random_box_pair(const DomainPtr& dom, std::mt19937& gen) {
  const double span = 0.25 * dom->R;
  std::uniform_real_distribution<double> pos(-span, span), height(0.2, 2.0);
  auto one = [&] {
    double a = pos(gen), b = pos(gen);
    if (a > b) std::swap(a, b);
    b = std::max(b, a + 4.0 * dom->h);
    return box_datum(dom, height(gen), a, b);
  };
  Field u = one();
  Field v = one();
  return {u, v};
}

inline std::vector<PropertyReport> run_suite(const RunConfig& c) {
  const auto& mp = c.params;
  ExponentSet ex = derive_exponents(mp);
  ExponentSet seen = ex;
  seen.beta *= c.verify.beta_scale;
  seen.d_beta *= c.verify.beta_scale;
  auto has = [&](const char* name) {
    return std::find(c.verify.checks.begin(), c.verify.checks.end(), name) != c.verify.checks.end();
  };
  const auto cfg = c.step_config();
  auto dom = c.domain.build(mp.d);
  auto table = assemble_kernel(dom, c.epsilon, mp, c.exterior);
  const Field u0 = make_datum(c.datum, dom);
  std::vector<PropertyReport> out;

  Trajectory base;
  const bool need_base = has("mass_conservation") || has("time_decay") || has("energy_m") || has("energy_1");
  if (need_base) base = march(u0, cfg, table, mp.m);

  if (has("contraction") || has("dissipation")) {
    std::mt19937 gen(c.verify.seed);
    PropertyReport worst_c, worst_d;
    bool first = true;
    for (int k = 0; k < c.verify.pairs; ++k) {
      auto [a0, b0] = random_box_pair(dom, gen);
      const auto a = march(a0, cfg, table, mp.m), b = march(b0, cfg, table, mp.m);
      auto rc = check_contraction(a, b);
      auto rd = dissipation_report(a, b, table);
      if (first || rc.measured > worst_c.measured) worst_c = rc;
      if (first || rd.measured > worst_d.measured || !rd.passed()) worst_d = rd;
      first = false;
    }
    worst_c.extra["pairs"] = c.verify.pairs;
    worst_d.extra["pairs"] = c.verify.pairs;
    if (has("contraction")) out.push_back(worst_c);
    if (has("dissipation")) out.push_back(worst_d);
  }
  if (has("reflection")) {
    auto line = dom->mode == GridMode::full_line ? dom : build_domain(GridMode::full_line, 1, c.domain.R, c.domain.n);
    auto lt = line == dom ? table : assemble_kernel(line, c.epsilon, mp, c.exterior);
    const double b = c.verify.reflection_point;
    out.push_back(check_reflection(march(box_datum(line, 1.0, b - 2.0, b), cfg, lt, mp.m), b));
  }
  if (has("radial_monotonicity")) {
    auto rad = build_domain(GridMode::radial, mp.d, c.domain.R, c.domain.n);
    auto rt = assemble_kernel(rad, c.epsilon, mp, c.exterior);
    out.push_back(check_radial_monotonicity(march(bump_datum(rad, 1.0, 2.0), cfg, rt, mp.m)));
  }
  if (has("mass_conservation")) {
    const int nf = c.verify.refined_n > 0 ? c.verify.refined_n : 2 * c.domain.n;
    auto fine = build_domain(c.domain.mode, mp.d, c.domain.R, nf);
    auto ft = assemble_kernel(fine, c.epsilon, mp, c.exterior);
    auto refined = march(make_datum(c.datum, fine), cfg, ft, mp.m);
    out.push_back(check_mass_conservation(base, refined, mp, ex));
  }
  if (has("time_decay")) out.push_back(fit_time_decay(base, seen));
  if (has("energy_m")) out.push_back(energy_estimate_check(base, table, mp.m));
  if (has("energy_1") && !(has("energy_m") && mp.m == 1.0)) out.push_back(energy_estimate_check(base, table, 1.0));
  return out;
}

}  // namespace detail

struct RunResult {
  fs::path dir;
  std::vector<PropertyReport> reports;
  int failed() const {
    int n = 0;
    for (const auto& r : reports) n += r.status == CheckStatus::fail;
    return n;
  }
};

/// Execute the configured experiment into `dir` (config.output when empty).
inline RunResult run_experiment(const RunConfig& c, fs::path dir = {}) {
  validate(c);
  if (dir.empty()) dir = c.output;
  fs::create_directories(dir);
  RunResult res{dir, {}};
  write_json(dir / "config.json", c.source);
  const auto& mp = c.params;

  if (c.experiment == Experiment::march) {
    try {
      write_json(dir / "exponents.json", to_json(derive_exponents(mp)));
    } catch (const RegimeError&) {
      // Marching does not need a self-similar regime.
    }
    auto dom = c.domain.build(mp.d);
    auto table = assemble_kernel(dom, c.epsilon, mp, c.exterior);
    auto traj = march(make_datum(c.datum, dom), c.step_config(), table, mp.m);
    write_snapshots(dir / "snapshots.csv", traj);
    write_diagnostics(dir / "diagnostics.csv", traj);
    return res;
  }

  const auto ex = derive_exponents(mp);
  write_json(dir / "exponents.json", to_json(ex));

  switch (c.experiment) {
    case Experiment::exponents:
    case Experiment::march:
      break;
    case Experiment::extract: {
      auto xc = extraction_config(c);
      auto r = extract_barenblatt(mp, xc);
      write_profile(dir / "profile.csv", r.profile);
      PropertyReport conv{"extraction_convergence", CheckStatus::info, r.distances.empty() ? 0.0 : r.distances.back(),
                          0.0, "successive profile distances along the schedule", {}};
      for (std::size_t j = 0; j < r.distances.size(); ++j) conv.extra["distance_" + std::to_string(j)] = r.distances[j];
      conv.extra["profile_mass"] = r.profile.mass;
      res.reports.push_back(conv);
      try {
        res.reports.push_back(fit_tail_decay(r.profile));
      } catch (const WindowError& e) {
        res.reports.push_back({"tail_decay", CheckStatus::fail, 0.0, 0.0, e.what(), {}});
      }
      break;
    }
    case Experiment::barrier: {
      auto dom = c.domain.build(mp.d);
      auto table = assemble_kernel(dom, c.epsilon, mp, c.exterior);
      const Field u0 = make_datum(c.datum, dom);
      auto bc = build_barrier(mp, ex, datum_stats(u0), c.barrier);
      auto traj = march(u0, c.step_config(), table, mp.m);
      auto dr = check_domination(traj, bc, mp, ex);
      PropertyReport dom_rep{"barrier_domination", dr.passed ? CheckStatus::pass : CheckStatus::fail, dr.max_violation,
                             1e-3, "global barrier dominates the trajectory", {}};
      dom_rep.extra["worst_step"] = dr.worst_step;
      dom_rep.extra["worst_x"] = dr.worst_x;
      for (const auto& [k, v] : to_json(bc).items())
        if (v.is_number()) dom_rep.extra["barrier_" + k] = v.get<double>();
      res.reports.push_back(dom_rep);

      CsvWriter csv(dir / "barrier.csv", {"z", "G", "region", "residual"});
      const auto far = far_samples(bc, mp, c.barrier.far_samples, c.barrier.far_span);
      const auto near = near_samples(bc, c.barrier.near_samples);
      double far_min = std::numeric_limits<double>::infinity();
      for (double z : near) {
        const double r = supersolution_residual(bc, z, mp, ex);
        csv.raw(fmt17(z) + "," + fmt17(eval_G(z, bc, mp)) + ",near," + fmt17(r));
      }
      for (double z : far) {
        const double r = supersolution_residual(bc, z, mp, ex);
        far_min = std::min(far_min, r);
        csv.raw(fmt17(z) + "," + fmt17(eval_G(z, bc, mp)) + ",far," + fmt17(r));
      }
      const double floor = -1e-6 * ex.beta * bc.A;
      res.reports.push_back(make_report("barrier_far_residual", far_min >= floor, far_min, -floor,
                                        "supersolution residual in the far region"));
      break;
    }
    case Experiment::verify_suite:
      res.reports = detail::run_suite(c);
      break;
  }
  if (c.experiment != Experiment::exponents) write_json(dir / "report.json", detail::reports_json(res.reports));
  return res;
}

// ---------------------------------------------------------------------------
// Reports

/// Fixed-width table of report.json; falls back to a diagnostics summary.
/// Returns the number of FAIL rows.
inline int emit_report(const fs::path& dir, std::ostream& os = std::cout) {
  if (!fs::is_directory(dir)) throw MissingArtifact("no run directory " + dir.string());
  const auto report = dir / "report.json";
  if (fs::exists(report)) {
    const json arr = read_json(report);
    char line[200];
    std::snprintf(line, sizeof line, "%-28s %16s %16s  %s\n", "check", "measured", "tolerance", "status");
    os << line;
    int failed = 0;
    for (const auto& r : arr) {
      auto num = [](const json& v) {
        if (!v.is_number()) return v.get<std::string>();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return std::string(buf);
      };
      const std::string status = r.at("status").get<std::string>();
      failed += status == "FAIL";
      std::snprintf(line, sizeof line, "%-28s %16s %16s  %s\n", r.at("name").get<std::string>().c_str(),
                    num(r.at("measured")).c_str(), num(r.at("tolerance")).c_str(), status.c_str());
      os << line;
    }
    return failed;
  }
  const auto diag = dir / "diagnostics.csv";
  if (fs::exists(diag)) {
    std::ifstream is(diag);
    std::string header, row, last;
    std::getline(is, header);
    int rows = 0;
    while (std::getline(is, row))
      if (!row.empty()) {
        last = row;
        ++rows;
      }
    os << "diagnostics: " << rows << " rows\n" << header << '\n' << last << '\n';
    return 0;
  }
  throw MissingArtifact("neither report.json nor diagnostics.csv in " + dir.string());
}

}  // namespace dnl
