#pragma once

#include <filesystem>
#include <string>

#include "fdkp/config.hpp"
#include "fdkp/io.hpp"
#include "fdkp/solver.hpp"
#include "json.hpp"

namespace fdkp {

inline nlohmann::json to_json(const Certificates& c) {
  return {{"nehari_defect", c.nehari_defect},
          {"identity_defect", c.identity_defect},
          {"second_variation", c.second_variation},
          {"ray_lambdas", c.ray_lambdas},
          {"ray_values", c.ray_values},
          {"ray_maximum", c.ray_maximum},
          {"lower_bound_ratio", c.lower_bound_ratio},
          {"S_negative", c.S_negative},
          {"T_positive", c.T_positive}};
}

inline nlohmann::json to_json(const ReductionState& r) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : r.log) log.push_back({{"step", s.step}, {"delta_x", s.delta_x}, {"ratio", s.ratio}});
  return {{"eps", r.eps},
          {"converged", r.converged},
          {"contraction", r.contraction},
          {"u1_eps_norm", r.u1_eps_norm},
          {"in_unit_ball", r.in_unit_ball},
          {"u2_x_norm", r.u2_x_norm},
          {"sigma", r.sigma},
          {"fixed_point_defect", r.fixed_point_defect},
          {"system_residual_z", r.system_residual_z},
          {"picard_log", log}};
}

// Certificate tolerance on the Nehari defect used to decide the exit status of a solve.
inline double certificate_tolerance(const SolverConfig& c) { return std::max(1e-8, 10.0 * c.grad_tol); }

inline nlohmann::json ground_state_json(const GroundState& gs, const RunConfig& rc) {
  const Grid2D& g = gs.field.grid();
  const Grid2D& pg = gs.physical.grid();
  nlohmann::json j;
  j["format"] = "fdkp-ground-state-1";
  j["config"] = config_entries(rc);
  j["grid"] = {{"nx", g.nx()}, {"ny", g.ny()}, {"lx", g.lx()}, {"ly", g.ly()}};
  j["physical_grid"] = {{"nx", pg.nx()}, {"ny", pg.ny()}, {"lx", pg.lx()}, {"ly", pg.ly()}};
  j["method"] = to_string(gs.config.method);
  j["target"] = to_string(gs.config.target);
  j["eps"] = gs.config.kp() ? 0.0 : gs.config.eps;
  j["T"] = gs.T;
  j["Q"] = gs.Q;
  j["S"] = gs.S;
  j["remainder"] = gs.remainder;
  j["physical_Q"] = gs.physical_Q;
  j["physical_S"] = gs.physical_S;
  if (!gs.config.kp()) {
    const double e = gs.config.eps;
    j["I_eps"] = e * e * e * gs.T;
  }
  j["grad_norm"] = gs.grad_norm;
  j["residual"] = gs.residual;
  j["ytilde_norm"] = gs.ytilde_norm;
  j["nonvanishing"] = gs.nonvanishing;
  j["iterations"] = gs.iterations;
  j["wall_time"] = rc.record_timing ? gs.wall_time : 0.0;
  j["certificates"] = to_json(gs.certificates);
  j["certificates_passed"] = gs.certificates.passed(certificate_tolerance(gs.config));
  if (gs.reduction) j["reduction"] = to_json(*gs.reduction);
  return j;
}

inline CsvWriter history_csv(const GroundState& gs) {
  CsvWriter w({"iter", "T", "Q", "S", "lambda", "grad_norm", "residual", "nonvanishing"});
  for (const auto& h : gs.history)
    w.row({static_cast<double>(h.iter), h.T, h.Q, h.S, h.lambda, h.grad_norm, h.residual, h.nonvanishing});
  return w;
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Writes ground_state.json, field.fld (physical field), zeta.fld (KP picture, FDKP targets) and
// history.csv into dir, honoring the format list.
inline std::vector<std::filesystem::path> write_ground_state(const std::filesystem::path& dir, const GroundState& gs,
                                                             const Problem& prob, const RunConfig& rc) {
  std::vector<std::filesystem::path> out;
  if (rc.wants("json")) {
    out.push_back(dir / "ground_state.json");
    detail::write_file(out.back(), dump_json(ground_state_json(gs, rc)));
  }
  if (rc.wants("fld")) {
    out.push_back(dir / "field.fld");
    write_field(out.back(), gs.physical);
    if (!gs.config.kp()) {
      out.push_back(dir / "zeta.fld");
      write_field(out.back(), prob.kp_picture(gs.field));
    }
  }
  if (rc.wants("csv")) {
    out.push_back(dir / "history.csv");
    history_csv(gs).save(out.back());
  }
  return out;
}

}  // namespace fdkp
