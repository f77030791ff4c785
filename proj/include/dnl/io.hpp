#pragma once

// CSV and JSON output. Floats are written with 17 significant digits so a
// value read back is the value written.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnl/barrier.hpp"
#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/resolvent.hpp"
#include "dnl/selfsim.hpp"
#include "dnl/verify.hpp"

namespace dnl {

using json = nlohmann::ordered_json;

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// JSON has no infinity; non-finite values are written as strings.
inline json number_or_string(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << fmt17(values[i]);
    os_ << '\n';
  }
  void raw(const std::string& line) { os_ << line << '\n'; }

 private:
  std::ofstream os_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline json to_json(const ModelParams& mp) { return {{"d", mp.d}, {"s", mp.s}, {"p", mp.p}, {"m", mp.m}}; }

inline json to_json(const ExponentSet& ex) {
  return {{"beta", ex.beta},
          {"d_beta", ex.d_beta},
          {"p_mc", ex.p_mc},
          {"p_one", ex.p_one},
          {"q_s", number_or_string(ex.q_s)},
          {"alpha_smooth", ex.alpha_smooth},
          {"gamma_smooth", ex.gamma_smooth},
          {"tail_exponent", ex.tail_exponent},
          {"log_power", ex.log_power},
          {"regime", to_string(ex.regime)}};
}

inline json to_json(const PropertyReport& r) {
  json extra = json::object();
  for (const auto& [k, v] : r.extra) extra[k] = number_or_string(v);
  return {{"name", r.name},
          {"status", to_string(r.status)},
          {"measured", number_or_string(r.measured)},
          {"tolerance", number_or_string(r.tolerance)},
          {"anchor", r.anchor},
          {"extra", extra}};
}

inline json to_json(const BarrierConstants& c) {
  return {{"regime", to_string(c.regime)}, {"A", c.A},   {"C1", c.C1},
          {"C2", c.C2},                    {"R1", c.R1}, {"R2", c.R2},
          {"log_power", c.log_power},      {"three_piece", c.three_piece},
          {"iterations", c.iterations},    {"flagged", c.flagged}};
}

/// step,t,x,u for every snapshot.
inline void write_snapshots(const std::filesystem::path& path, const Trajectory& traj) {
  CsvWriter csv(path, {"step", "t", "x", "u"});
  for (int k = 0; k < traj.size(); ++k) {
    const Field& u = traj.snapshots[k];
    for (int i = 0; i < u.size(); ++i) csv.row({static_cast<double>(k), traj.times[k], u.domain->nodes[i], u[i]});
  }
}

inline void write_diagnostics(const std::filesystem::path& path, const Trajectory& traj) {
  CsvWriter csv(path, {"step", "t", "newton_iters", "residual", "residual_max", "mass", "linf", "energy"});
  for (const auto& d : traj.diagnostics)
    csv.row({static_cast<double>(d.step), d.t, static_cast<double>(d.newton_iters), d.residual, d.residual_max, d.mass,
             d.linf, d.energy});
}

inline void write_profile(const std::filesystem::path& path, const Profile& pr) {
  CsvWriter csv(path, {"r", "F"});
  const Field& f = pr.field;
  for (int i = 0; i < f.size(); ++i) csv.row({f.domain->nodes[i], f[i]});
}

}  // namespace dnl
