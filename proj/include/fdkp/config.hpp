#pragma once

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fdkp/io.hpp"
#include "fdkp/solver.hpp"

namespace fdkp {

// Flat key = value run description. Grid keys describe the KP box; FDKP targets work on the box
// (lx / eps, ly / eps^2) with the same sample counts.
struct RunConfig {
  SolverConfig solver;
  std::size_t nx = 0;  // 0: 512 for kp0, 1024 for FDKP targets
  std::size_t ny = 512;
  double lx = 100.0;
  double ly = 100.0;
  bool force = false;
  std::string initial_file;
  std::string output_dir = "fdkp_out";
  std::vector<double> sweep{0.2, 0.1, 0.05};
  std::vector<std::string> formats{"json", "csv", "fld"};
  int jobs = 1;
  bool record_timing = false;

  std::size_t resolved_nx() const { return nx ? nx : (solver.kp() ? 512 : 1024); }
  Grid2D kp_grid() const { return Grid2D(resolved_nx(), ny, lx, ly); }
  bool wants(const std::string& format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
  }

  void validate() const;
};

inline constexpr double kEpsGuard = 0.25;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  if (v.empty() || v[0] == '-') throw InvalidArgument("config key '" + key + "': '" + v + "' is not a non-negative integer");
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a non-negative integer");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "method", "target", "eps", "beta", "delta", "p", "tau", "grad_tol", "residual_tol", "max_iter", "seed",
      "initial_guess", "initial_file", "nx", "ny", "lx", "ly", "sobolev_s", "include_beta_weight", "dealias",
      "preconditioned", "ball_radius", "picard_tol", "picard_max_iter", "stall_window", "nonvanishing_every", "force",
      "output_dir", "sweep", "formats", "jobs", "record_timing"};
  return keys;
}

// Applies one key; unknown keys are errors.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = detail::trim(raw);
  SolverConfig& s = c.solver;
  using namespace detail;
  if (key == "method") s.method = parse_method(v);
  else if (key == "target") s.target = parse_target(v);
  else if (key == "eps") s.eps = parse_double(key, v);
  else if (key == "beta") s.beta = parse_double(key, v);
  else if (key == "delta") s.delta = parse_double(key, v);
  else if (key == "p") s.p = parse_int<int>(key, v);
  else if (key == "tau") s.tau = parse_double(key, v);
  else if (key == "grad_tol") s.grad_tol = parse_double(key, v);
  else if (key == "residual_tol") s.residual_tol = parse_double(key, v);
  else if (key == "max_iter") s.max_iter = parse_int<int>(key, v);
  else if (key == "seed") s.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "initial_guess") s.initial_guess = parse_initial_guess(v);
  else if (key == "initial_file") c.initial_file = v;
  else if (key == "nx") c.nx = v == "auto" ? 0 : parse_int<std::size_t>(key, v);
  else if (key == "ny") c.ny = parse_int<std::size_t>(key, v);
  else if (key == "lx") c.lx = parse_double(key, v);
  else if (key == "ly") c.ly = parse_double(key, v);
  else if (key == "sobolev_s") s.sobolev_s = parse_double(key, v);
  else if (key == "include_beta_weight") s.include_beta_weight = parse_bool(key, v);
  else if (key == "dealias") s.dealias = parse_bool(key, v);
  else if (key == "preconditioned") s.preconditioned = parse_bool(key, v);
  else if (key == "ball_radius") s.ball_radius = parse_double(key, v);
  else if (key == "picard_tol") s.picard_tol = parse_double(key, v);
  else if (key == "picard_max_iter") s.picard_max_iter = parse_int<int>(key, v);
  else if (key == "stall_window") s.stall_window = parse_int<int>(key, v);
  else if (key == "nonvanishing_every") s.nonvanishing_every = parse_int<int>(key, v);
  else if (key == "force") c.force = parse_bool(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "sweep") {
    c.sweep.clear();
    for (const auto& item : split_list(v)) c.sweep.push_back(parse_double(key, item));
  } else if (key == "formats") c.formats = split_list(v);
  else if (key == "jobs") c.jobs = parse_int<int>(key, v);
  else if (key == "record_timing") c.record_timing = parse_bool(key, v);
  else throw InvalidArgument("unknown config key '" + key + "'");
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  return parse_config(detail::read_file(path), std::move(base));
}

inline std::map<std::string, std::string> config_entries(const RunConfig& c) {
  const SolverConfig& s = c.solver;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto d = [](double v) { return format_double(v); };
  std::string sweep, formats;
  for (std::size_t k = 0; k < c.sweep.size(); ++k) sweep += (k ? "," : "") + format_double(c.sweep[k]);
  for (std::size_t k = 0; k < c.formats.size(); ++k) formats += (k ? "," : "") + c.formats[k];
  return {{"method", to_string(s.method)},
          {"target", to_string(s.target)},
          {"eps", d(s.eps)},
          {"beta", d(s.beta)},
          {"delta", d(s.delta)},
          {"p", std::to_string(s.p)},
          {"tau", d(s.tau)},
          {"grad_tol", d(s.grad_tol)},
          {"residual_tol", d(s.residual_tol)},
          {"max_iter", std::to_string(s.max_iter)},
          {"seed", std::to_string(s.seed)},
          {"initial_guess", to_string(s.initial_guess)},
          {"initial_file", c.initial_file},
          {"nx", c.nx ? std::to_string(c.nx) : "auto"},
          {"ny", std::to_string(c.ny)},
          {"lx", d(c.lx)},
          {"ly", d(c.ly)},
          {"sobolev_s", d(s.sobolev_s)},
          {"include_beta_weight", b(s.include_beta_weight)},
          {"dealias", b(s.dealias)},
          {"preconditioned", b(s.preconditioned)},
          {"ball_radius", d(s.ball_radius)},
          {"picard_tol", d(s.picard_tol)},
          {"picard_max_iter", std::to_string(s.picard_max_iter)},
          {"stall_window", std::to_string(s.stall_window)},
          {"nonvanishing_every", std::to_string(s.nonvanishing_every)},
          {"force", b(c.force)},
          {"output_dir", c.output_dir},
          {"sweep", sweep},
          {"formats", formats},
          {"jobs", std::to_string(c.jobs)},
          {"record_timing", b(c.record_timing)}};
}

inline std::string emit_config(const RunConfig& c) {
  const auto entries = config_entries(c);
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + entries.at(key) + "\n";
  return out;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return config_entries(a) == config_entries(b); }

inline void RunConfig::validate() const {
  solver.validate();
  if (nx != 0 && (nx < 8 || nx % 2)) throw InvalidArgument("nx must be even and at least 8");
  if (ny < 8 || ny % 2) throw InvalidArgument("ny must be even and at least 8");
  if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("lx and ly must be positive");
  if (!solver.kp() && solver.eps > kEpsGuard && !force)
    throw InvalidArgument("eps = " + format_double(solver.eps) + " exceeds " + format_double(kEpsGuard) +
                          " at which the reduction is trusted; set force = true to run anyway");
  if (solver.initial_guess == InitialGuess::file && initial_file.empty())
    throw InvalidArgument("initial_guess = file needs initial_file");
  for (const auto& f : formats)
    if (f != "json" && f != "csv" && f != "fld") throw InvalidArgument("unknown format '" + f + "' (json, csv, fld)");
  if (jobs < 1) throw InvalidArgument("jobs must be at least 1");
  if (output_dir.empty()) throw InvalidArgument("output_dir must not be empty");
}

// Additional rules for the eps sweep.
inline void validate_sweep(const RunConfig& c) {
  if (c.sweep.size() < 3) throw InvalidArgument("sweep needs at least 3 eps values to show a trend");
  std::set<double> distinct(c.sweep.begin(), c.sweep.end());
  if (distinct.size() != c.sweep.size()) throw InvalidArgument("sweep eps values must be distinct");
  for (double e : c.sweep)
    if (!(e > 0.0 && e <= kEpsGuard) && !c.force)
      throw InvalidArgument("sweep eps " + format_double(e) + " outside (0, " + format_double(kEpsGuard) + "]");
}

}  // namespace fdkp
