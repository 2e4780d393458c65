#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "fdkp/config.hpp"
#include "fdkp/io.hpp"
#include "fdkp/solver.hpp"
#include "json.hpp"

namespace fdkp {

struct SweepRow {
  double eps = 0.0;
  double c_eps = 0.0;  // T-scale minimum, eps^{-3} I_eps
  double Q = 0.0, S = 0.0;
  double zeta_gap_ytilde = 0.0;  // |zeta^eps - zeta*|_Ytilde after alignment
  double u_gap_eps_rel = 0.0;    // |u^eps - u*_eps|_eps / |u*_eps|_eps after alignment
  int iterations = 0;
  double wall_time = 0.0;
  double residual = 0.0;
  // reduction at the fixed profile zeta*; a failure here leaves the row valid
  double u2_x_norm = std::numeric_limits<double>::quiet_NaN();
  double u2_contraction = std::numeric_limits<double>::quiet_NaN();
  std::string u2_failure;
  bool ok = false;
  std::string failure;
};

struct SweepReport {
  double c0 = 0.0;
  int c0_iterations = 0;
  double c0_residual = 0.0;
  std::vector<SweepRow> rows;  // eps descending
  double c_gap_slope = 0.0;    // log |c_eps - c0| against log eps
  double u_gap_slope = 0.0;
  double u2_slope = 0.0;  // NaN unless every row has |u2|_X
  bool c_gap_decreasing = false;
  bool u_gap_decreasing = false;
  bool complete = false;
};

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw InvalidArgument("loglog_slope needs positive data");
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// Strictly decreasing as eps decreases, rows ordered by eps descending.
inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return true;
}

// Runs fn(0..n-1) on up to jobs threads; each index runs exactly once.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) fn(k);
    });
  for (auto& t : pool) t.join();
}

// Solver settings used for the sweep rows: fdkp_reduced when asked for, fdkp_direct otherwise.
inline SolverConfig sweep_row_config(const RunConfig& rc, double eps) {
  SolverConfig c = rc.solver;
  if (c.target != Target::fdkp_reduced) c.target = Target::fdkp_direct;
  if (c.target == Target::fdkp_reduced) c.method = Method::nehari_pg;
  c.eps = eps;
  return c;
}

inline Grid2D sweep_kp_grid(const RunConfig& rc) { return Grid2D(rc.nx ? rc.nx : 1024, rc.ny, rc.lx, rc.ly); }

inline SweepRow sweep_row(const RunConfig& rc, double eps, const Field& zeta_star, const std::optional<Field>& file_field) {
  SweepRow row;
  row.eps = eps;
  try {
    const SolverConfig cfg = sweep_row_config(rc, eps);
    const Problem prob(cfg, zeta_star.grid());
    const GroundState gs = solve(prob, initial_guess(prob, file_field));
    row.c_eps = gs.T;
    row.Q = gs.physical_Q;
    row.S = gs.physical_S;
    row.iterations = gs.iterations;
    row.wall_time = rc.record_timing ? gs.wall_time : 0.0;
    row.residual = gs.residual;

    const NormKind yt = NormKind::ytilde(cfg.beta, true);
    const Alignment za = align(zeta_star, prob.kp_picture(gs.field));
    row.zeta_gap_ytilde = norm(zeta_star - za.aligned, yt);

    const Field u_star = change_vars_i2_inverse(zeta_star, eps);
    const Alignment ua = align(u_star, gs.physical);
    const NormKind en = NormKind::epsilon(eps, cfg.beta, cfg.include_beta_weight);
    row.u_gap_eps_rel = norm(u_star - ua.aligned, en) / norm(u_star, en);

    // u2 at the fixed profile zeta*, independent of the computed ground state
    const SymbolTable& t = prob.table();
    TEpsOptions topt;
    topt.ball_radius = cfg.ball_radius;
    topt.picard.tol = cfg.picard_tol;
    topt.picard.max_iter = cfg.picard_max_iter;
    topt.picard.disc = cfg.disc();
    topt.picard.s = cfg.sobolev_s;
    topt.picard.include_beta_weight = cfg.include_beta_weight;
    row.ok = true;
    try {
      const ReductionState st = t_eps(project_scaled_cone(zeta_star, t), t, topt).state;
      row.u2_x_norm = st.u2_x_norm;
      row.u2_contraction = st.contraction;
    } catch (const SolverError& e) {
      row.u2_failure = e.what();
    }
  } catch (const std::exception& e) {
    row.ok = false;
    row.failure = e.what();
  }
  return row;
}

// c0 from kp0 on the KP box, then one ground state per eps.
inline SweepReport run_sweep(const RunConfig& rc, const std::optional<Field>& file_field = std::nullopt) {
  validate_sweep(rc);
  const Grid2D kg = sweep_kp_grid(rc);
  SolverConfig kc = rc.solver;
  kc.target = Target::kp0;
  if (kc.method == Method::petviashvili) kc.method = Method::nehari_pg;
  const Problem kprob(kc, kg);
  const GroundState kp = solve(kprob, initial_guess(kprob));

  SweepReport rep;
  rep.c0 = kp.T;
  rep.c0_iterations = kp.iterations;
  rep.c0_residual = kp.residual;

  std::vector<double> eps = rc.sweep;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  rep.rows.resize(eps.size());
  std::optional<Field> ff;
  if (file_field && file_field->grid() == kg) ff = file_field;
  parallel_for(eps.size(), rc.jobs, [&](std::size_t k) { rep.rows[k] = sweep_row(rc, eps[k], kp.field, ff); });

  rep.complete = std::all_of(rep.rows.begin(), rep.rows.end(), [](const SweepRow& r) { return r.ok; });
  if (rep.complete) {
    std::vector<double> e, cg, ug, u2;
    for (const auto& r : rep.rows) {
      e.push_back(r.eps);
      cg.push_back(std::abs(r.c_eps - rep.c0));
      ug.push_back(r.u_gap_eps_rel);
      u2.push_back(r.u2_x_norm);
    }
    rep.c_gap_decreasing = strictly_decreasing(cg);
    rep.u_gap_decreasing = strictly_decreasing(ug);
    rep.c_gap_slope = loglog_slope(e, cg);
    rep.u_gap_slope = loglog_slope(e, ug);
    const bool have_u2 = std::all_of(u2.begin(), u2.end(), [](double v) { return std::isfinite(v); });
    rep.u2_slope = have_u2 ? loglog_slope(e, u2) : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

inline CsvWriter sweep_csv(const SweepReport& rep) {
  CsvWriter w({"eps", "c_eps", "Q", "S", "zeta_gap_ytilde", "u_gap_eps_rel", "iterations", "wall_time"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rep.rows) {
    if (r.ok)
      w.row({r.eps, r.c_eps, r.Q, r.S, r.zeta_gap_ytilde, r.u_gap_eps_rel, static_cast<double>(r.iterations), r.wall_time});
    else
      w.row({r.eps, nan, nan, nan, nan, nan, nan, nan});
  }
  return w;
}

inline nlohmann::json sweep_json(const SweepReport& rep, const RunConfig& rc) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json j{{"eps", r.eps}, {"ok", r.ok}};
    if (r.ok) {
      j["c_eps"] = r.c_eps;
      j["c_gap"] = std::abs(r.c_eps - rep.c0);
      j["Q"] = r.Q;
      j["S"] = r.S;
      j["zeta_gap_ytilde"] = r.zeta_gap_ytilde;
      j["u_gap_eps_rel"] = r.u_gap_eps_rel;
      if (r.u2_failure.empty()) {
        j["u2_x_norm"] = r.u2_x_norm;
        j["u2_contraction"] = r.u2_contraction;
      } else {
        j["u2_failure"] = r.u2_failure;
      }
      j["iterations"] = r.iterations;
      j["residual"] = r.residual;
      j["wall_time"] = r.wall_time;
    } else {
      j["failure"] = r.failure;
    }
    rows.push_back(j);
  }
  nlohmann::json j;
  j["format"] = "fdkp-sweep-1";
  j["config"] = config_entries(rc);
  j["c0"] = rep.c0;
  j["c0_iterations"] = rep.c0_iterations;
  j["c0_residual"] = rep.c0_residual;
  j["rows"] = rows;
  j["complete"] = rep.complete;
  if (rep.complete) {
    j["c_gap_decreasing"] = rep.c_gap_decreasing;
    j["u_gap_decreasing"] = rep.u_gap_decreasing;
    j["slopes"] = {{"c_gap", rep.c_gap_slope}, {"u_gap_eps_rel", rep.u_gap_slope}};
    j["slopes"]["u2_x_norm"] = std::isfinite(rep.u2_slope) ? nlohmann::json(rep.u2_slope) : nlohmann::json(nullptr);
  }
  return j;
}

}  // namespace fdkp
