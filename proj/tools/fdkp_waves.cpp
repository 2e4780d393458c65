// fdkp_waves: lump checks, ground-state solves, eps sweeps and plot data.
//
// Exit codes: 0 pass, 2 tolerance failure, 3 solver failure, 4 configuration or I/O error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fdkp/config.hpp"
#include "fdkp/functionals.hpp"
#include "fdkp/io.hpp"
#include "fdkp/lump.hpp"
#include "fdkp/report.hpp"
#include "fdkp/solver.hpp"
#include "fdkp/sweep.hpp"
#include "fdkp/symbols.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fdkp;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitTolerance = 2;
constexpr int kExitSolver = 3;
constexpr int kExitConfig = 4;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;            // key=value
  std::map<std::string, std::string> keys;  // --key value
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override one key, key=value (repeatable)");
  for (const auto& key : config_keys()) cmd->add_option("--" + key, o.keys[key], "config key " + key);
}

RunConfig load(const CommonOptions& o) {
  RunConfig rc = o.config_file.empty() ? RunConfig{} : load_config(o.config_file);
  for (const auto& key : config_keys()) {
    auto it = o.keys.find(key);
    if (it != o.keys.end() && !it->second.empty()) set_config_value(rc, key, it->second);
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + s + "'");
    set_config_value(rc, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  if (const char* env = std::getenv("FDKP_WAVES_OUTDIR"); env && *env) rc.output_dir = env;
  rc.validate();
  return rc;
}

void line(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-34s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- verify-lump

int cmd_verify_lump(const RunConfig& rc, const std::string& write_oracle) {
  const double beta = rc.solver.beta;
  const LumpParams lp{beta, 1.0};
  auto residual_at = [&](double lx, double ly) {
    const Grid2D g(rc.resolved_nx(), rc.ny, lx, ly);
    const SymbolTable t = build_table(g, beta, rc.solver.delta, rc.solver.eps);
    return residual_steady_kp(lump_sample(lp, g), t, rc.solver.disc()).ytilde_relative;
  };
  bool ok = true;
  nlohmann::json rep;
  rep["format"] = "fdkp-verify-lump-1";
  rep["config"] = config_entries(rc);

  const double r = residual_at(rc.lx, rc.ly);
  const double r_half = residual_at(0.5 * rc.lx, 0.5 * rc.ly);
  const double r_big = residual_at(1.5 * rc.lx, 1.5 * rc.ly);
  rep["residual"] = {{"L", r}, {"half_L", r_half}, {"one_and_half_L", r_big}};
  const bool r_ok = r <= 1e-2, trend_ok = r_big < r;
  line(r_ok, "residual at L <= 1e-2", num(r));
  line(trend_ok, "residual at 1.5 L smaller", num(r_big) + " < " + num(r));
  std::printf("info  %-34s %s\n", "residual at L/2 (reported)", num(r_half).c_str());
  ok = ok && r_ok && trend_ok;

  const double center = LumpProfile(lp).value(0.0, 0.0);
  const bool c_ok = std::abs(center + 4.0) <= 1e-14;
  line(c_ok, "u(0,0) = -4", num(center));
  ok = ok && c_ok;

  const LumpOracle o = lump_oracle_scalars(lp);
  QuadratureConfig half;
  half.half_width = 0.5 * QuadratureConfig{}.half_width;
  const LumpOracle oh = lump_oracle_scalars(lp, half);
  const double ratio = o.T0 / o.Q;
  const double mass_change = std::abs(o.mass - oh.mass) / o.mass;
  const bool n_ok = std::abs(ratio - 1.0 / 3.0) <= 1e-4, s_ok = o.S < 0.0, m_ok = mass_change <= 1e-4;
  line(n_ok, "oracle T0/Q = 1/3 +- 1e-4", num(ratio));
  line(s_ok, "oracle S < 0", num(o.S));
  line(m_ok, "oracle mass stable under doubling", num(mass_change));
  ok = ok && n_ok && s_ok && m_ok;
  rep["oracle"] = o;
  rep["oracle_half_domain_mass"] = oh.mass;
  rep["passed"] = ok;

  if (rc.wants("json")) detail::write_file(fs::path(rc.output_dir) / "verify_lump.json", dump_json(rep));
  if (!write_oracle.empty()) {
    nlohmann::json j = o;
    detail::write_file(write_oracle, dump_json(j));
  }
  return ok ? kExitPass : kExitTolerance;
}

// ---- solve

int cmd_solve(const RunConfig& rc) {
  const Problem prob(rc.solver, rc.kp_grid());
  std::optional<Field> file_field;
  if (rc.solver.initial_guess == InitialGuess::file) file_field = read_field(rc.initial_file);
  const GroundState gs = solve(prob, initial_guess(prob, file_field));
  const auto files = write_ground_state(rc.output_dir, gs, prob, rc);
  const bool cert = gs.certificates.passed(certificate_tolerance(rc.solver));
  std::printf("target %s  method %s  iterations %d\n", to_string(rc.solver.target), to_string(rc.solver.method),
              gs.iterations);
  std::printf("T %.12g  Q %.12g  S %.12g  residual %.3g  |zeta|_Ytilde %.6g\n", gs.T, gs.physical_Q, gs.physical_S,
              gs.residual, gs.ytilde_norm);
  line(gs.certificates.nehari_defect <= certificate_tolerance(rc.solver), "nehari defect", num(gs.certificates.nehari_defect));
  line(gs.certificates.second_variation < 0.0, "second variation < 0", num(gs.certificates.second_variation));
  line(gs.certificates.ray_maximum, "ray maximum at lambda = 1", "");
  line(gs.certificates.lower_bound_ratio >= 1.0, "T >= |zeta|^2 / 12", num(gs.certificates.lower_bound_ratio));
  line(gs.certificates.S_negative && gs.certificates.T_positive, "S < 0, T > 0", "");
  for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
  return cert ? kExitPass : kExitTolerance;
}

// ---- sweep

int cmd_sweep(const RunConfig& rc) {
  const SweepReport rep = run_sweep(rc);
  const fs::path dir(rc.output_dir);
  if (rc.wants("json")) detail::write_file(dir / "sweep.json", dump_json(sweep_json(rep, rc)));
  if (rc.wants("csv")) sweep_csv(rep).save(dir / "sweep.csv");
  std::printf("c0 %.12g  (%d iterations)\n", rep.c0, rep.c0_iterations);
  std::printf("%8s %16s %12s %14s %14s %12s\n", "eps", "c_eps", "|c-c0|", "zeta gap", "u gap rel", "|u2|_X");
  for (const auto& r : rep.rows) {
    if (r.ok)
      std::printf("%8.4g %16.12g %12.4e %14.4e %14.4e %12.4e\n", r.eps, r.c_eps, std::abs(r.c_eps - rep.c0),
                  r.zeta_gap_ytilde, r.u_gap_eps_rel, r.u2_x_norm);
    else
      std::printf("%8.4g  failed: %s\n", r.eps, r.failure.c_str());
  }
  for (const auto& r : rep.rows)
    if (r.ok && !r.u2_failure.empty()) std::printf("eps %g: |u2|_X at zeta* unavailable: %s\n", r.eps, r.u2_failure.c_str());
  if (!rep.complete) {
    std::printf("sweep incomplete\n");
    return kExitSolver;
  }
  line(rep.c_gap_decreasing, "|c_eps - c0| strictly decreasing", "slope " + num(rep.c_gap_slope));
  line(rep.u_gap_decreasing, "u gap strictly decreasing", "slope " + num(rep.u_gap_slope));
  std::printf("info  %-34s %s\n", "|u2|_X slope", std::isfinite(rep.u2_slope) ? num(rep.u2_slope).c_str() : "unavailable");
  return rep.c_gap_decreasing && rep.u_gap_decreasing ? kExitPass : kExitTolerance;
}

// ---- plot-data

int cmd_plot_data(const RunConfig& rc, const std::string& field_file, double lump_eps, std::size_t stride) {
  const fs::path dir(rc.output_dir);
  nlohmann::json summary;
  summary["format"] = "fdkp-plot-data-1";
  const Grid2D kg = rc.kp_grid();

  Field f = field_file.empty() ? lump_sample(LumpParams{rc.solver.beta, lump_eps}, kg) : read_field(field_file);
  const Grid2D& g = f.grid();
  const std::size_t ic = g.nx() / 2, jc = g.ny() / 2;

  CsvWriter sx({"x", "u"});
  CsvWriter sy({"y", "u"});
  double min_x = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    sx.row({g.x(i), f.values()[g.index(i, jc)]});
    min_x = std::min(min_x, f.values()[g.index(i, jc)]);
  }
  for (std::size_t j = 0; j < g.ny(); ++j) sy.row({g.y(j), f.values()[g.index(ic, j)]});
  sx.save(dir / "slice_y0.csv");
  sy.save(dir / "slice_x0.csv");
  summary["slice_y0_min"] = min_x;

  if (field_file.empty()) {
    // closed-form profile along y = 0, without the zero-mean correction of the samples
    const LumpProfile prof(LumpParams{rc.solver.beta, lump_eps});
    CsvWriter ex({"x", "u"});
    double m = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) {
      ex.row({g.x(i), prof.value(g.x(i), 0.0)});
      m = std::min(m, prof.value(g.x(i), 0.0));
    }
    ex.save(dir / "lump_profile_y0.csv");
    summary["lump_profile_y0_min"] = m;
  }

  CsvWriter grid2d({"x", "y", "u"});
  for (std::size_t j = 0; j < g.ny(); j += stride)
    for (std::size_t i = 0; i < g.nx(); i += stride) grid2d.row({g.x(i), g.y(j), f.values()[g.index(i, j)]});
  grid2d.save(dir / "grid_downsampled.csv");

  CsvWriter disp({"k1", "m", "mtilde"});
  double dmin = INFINITY, dmin_k = 0.0;
  for (int s = 0; s <= 400; ++s) {
    const double k = 10.0 * s / 400.0;
    const double m = eval_m(k, 0.0, rc.solver.beta);
    disp.row({k, m, s == 0 ? 1.0 : eval_mtilde(k, 0.0, rc.solver.beta)});  // k1 -> 0 limit along k2 = 0
    if (m < dmin) dmin = m, dmin_k = k;
  }
  disp.save(dir / "dispersion.csv");
  summary["dispersion_min"] = {{"k1", dmin_k}, {"m", dmin}};

  const SymbolTable t = build_table(kg, rc.solver.beta, rc.solver.delta, rc.solver.eps);
  for (const auto& [name, mult] : {std::pair<std::string, const Multiplier*>{"m", &t.m}, {"mtilde", &t.mtilde}, {"chi", &t.chi}})
    detail::write_file(dir / ("symbol_" + name + ".fld"), encode_field(kg.nx(), kg.ny(), kg.lx(), kg.ly(), full_lattice(kg, *mult)));
  summary["symbol_layout"] = "FFT index order, x fastest; column 0 is k1 = 0";
  detail::write_file(dir / "plot_data.json", dump_json(summary));
  std::printf("slice y=0 min %.12g  dispersion min %.12g at k1 = %g\n", min_x, dmin, dmin_k);
  return kExitPass;
}

// ---- check-format

int cmd_check_format(const std::vector<std::string>& files) {
  bool ok = true;
  for (const auto& path : files) {
    FieldHeader h;
    std::string problem;
    try {
      problem = field_format_problem(detail::read_file(path), &h);
    } catch (const IoError& e) {
      problem = e.what();
    }
    if (problem.empty())
      std::printf("OK   %s  %llux%llu  [%s x %s]\n", path.c_str(), static_cast<unsigned long long>(h.nx),
                  static_cast<unsigned long long>(h.ny), format_double(h.lx).c_str(), format_double(h.ly).c_str());
    else
      std::printf("BAD  %s  %s\n", path.c_str(), problem.c_str());
    ok = ok && problem.empty();
  }
  return ok ? kExitPass : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDKP-I / KP-I lump solitary waves"};
  app.require_subcommand(1);

  CommonOptions o_verify, o_solve, o_sweep, o_plot;
  std::string write_oracle, field_file;
  double lump_eps = 1.0;
  std::size_t stride = 8;
  std::vector<std::string> check_files;

  auto* verify = app.add_subcommand("verify-lump", "lump residual and oracle scalar checks");
  add_common(verify, o_verify);
  verify->add_option("--write-oracle", write_oracle, "write the oracle scalars JSON to this path");
  auto* solve_cmd = app.add_subcommand("solve", "compute one ground state");
  add_common(solve_cmd, o_solve);
  auto* sweep = app.add_subcommand("sweep", "eps convergence study");
  add_common(sweep, o_sweep);
  auto* plot = app.add_subcommand("plot-data", "slices, downsampled grid, dispersion and symbol dumps");
  add_common(plot, o_plot);
  plot->add_option("--field", field_file, "FDKPFLD1 field to slice (default: sampled lump)");
  plot->add_option("--lump-eps", lump_eps, "speed parameter of the sampled lump")->check(CLI::Range(1e-6, 1.0));
  plot->add_option("--stride", stride, "downsampling stride of the 2D grid")->check(CLI::PositiveNumber);
  auto* check = app.add_subcommand("check-format", "validate FDKPFLD1 files");
  check->add_option("files", check_files, "files to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*verify) return cmd_verify_lump(load(o_verify), write_oracle);
    if (*solve_cmd) return cmd_solve(load(o_solve));
    if (*sweep) {
      const RunConfig rc = load(o_sweep);
      validate_sweep(rc);
      return cmd_sweep(rc);
    }
    if (*plot) return cmd_plot_data(load(o_plot), field_file, lump_eps, stride);
    if (*check) return cmd_check_format(check_files);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
