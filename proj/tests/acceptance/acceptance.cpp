// Acceptance checks, one per criterion. Usage: acceptance [--criterion N]... (default: all).
// Prints one PASS/FAIL line per criterion; exit status 0 iff every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "fdkp/config.hpp"
#include "fdkp/diagnostics.hpp"
#include "fdkp/functionals.hpp"
#include "fdkp/io.hpp"
#include "fdkp/lump.hpp"
#include "fdkp/reduction.hpp"
#include "fdkp/solver.hpp"
#include "fdkp/sweep.hpp"
#include "fdkp/symbols.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fdkp;

namespace {

const double kBeta = 7.0 / 3.0;
const double kDelta = 0.3;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects sub-checks; the criterion passes when all of them do.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    all_ = all_ && ok;
    std::printf("    [%s] %s\n", ok ? "ok" : "FAILED", what.c_str());
    std::fflush(stdout);
  }
  bool passed() const { return all_; }

 private:
  bool all_ = true;
};

std::string fmt(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

SolverConfig base_config(Target target, Method method = Method::nehari_pg) {
  SolverConfig c;
  c.target = target;
  c.method = method;
  c.eps = 0.1;
  c.beta = kBeta;
  c.delta = kDelta;
  return c;
}

const Grid2D& kp_box() {
  static const Grid2D g(512, 512, 100.0, 100.0);
  return g;
}
const Grid2D& fdkp_kp_box() {
  static const Grid2D g(1024, 512, 100.0, 100.0);
  return g;
}

struct Solved {
  GroundState gs;
  double seconds;
};

Solved run(const SolverConfig& cfg, const Grid2D& kp) {
  const auto t0 = Clock::now();
  const Problem prob(cfg, kp);
  GroundState gs = solve(prob, initial_guess(prob));
  return {std::move(gs), seconds_since(t0)};
}

std::string describe(const GroundState& gs) {
  std::ostringstream os;
  os << to_string(gs.config.target) << "/" << to_string(gs.config.method);
  return os.str();
}

// ---- 1. lump residual

bool criterion1(Report& r) {
  const auto t0 = Clock::now();
  auto rel = [](double L) {
    const Grid2D g(512, 512, L, L);
    const SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
    return residual_steady_kp(lump_sample(LumpParams{}, g), t).ytilde_relative;
  };
  const double r100 = rel(100.0), r150 = rel(150.0);
  const double secs = seconds_since(t0);
  r.check(r100 <= 1e-2, fmt("relative Ytilde residual at 512^2, L=100: %.4e <= 1e-2", r100));
  r.check(r150 < r100, fmt("residual at L=150 %.4e < residual at L=100 %.4e", r150, r100));
  r.check(secs <= 30.0, fmt("runtime %.2f s <= 30 s", secs));
  return r.passed();
}

// ---- 2. Nehari identity and ray geometry of accepted ground states

bool criterion2(Report& r) {
  std::vector<Solved> runs;
  runs.push_back(run(base_config(Target::kp0), kp_box()));
  runs.push_back(run(base_config(Target::kp0, Method::petviashvili), kp_box()));
  runs.push_back(run(base_config(Target::fdkp_direct), fdkp_kp_box()));
  runs.push_back(run(base_config(Target::fdkp_reduced), fdkp_kp_box()));
  for (const auto& s : runs) {
    const Certificates& c = s.gs.certificates;
    const std::string who = describe(s.gs);
    r.check(c.identity_defect <= 1e-6, who + fmt(": |T - Q/3|/T = %.3e <= 1e-6", c.identity_defect));
    r.check(c.S_negative, who + fmt(": S = %.6g < 0", s.gs.physical_S));
    std::ostringstream rays;
    rays << who << ": T(l z) < T(z) for l in {0.5, 0.9, 1.1, 2}; values";
    for (double v : c.ray_values) rays << " " << v;
    r.check(c.ray_maximum && c.ray_values.size() == 5, rays.str());
  }
  return r.passed();
}

// ---- 3. closed-form projection

bool criterion3(Report& r) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uq(-3.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double Q = std::pow(10.0, uq(rng)), S = -std::pow(10.0, uq(rng));
    const double ref = -2.0 * Q / (3.0 * S);
    worst = std::max(worst, std::abs(nehari_lambda(Q, S, 2) - ref) / ref);
  }
  r.check(worst <= 1e-12, fmt("lambda = -2Q/(3S) on 1000 synthetic pairs, worst relative error %.2e <= 1e-12", worst));

  auto projected = [&](const Problem& prob, const Field& z, const std::string& who) {
    const Projection p = nehari_project(z, prob);
    const double T = p.eval.f.value;
    const double d = std::abs(p.ray_derivative);
    r.check(d <= 1e-10 * std::abs(T), who + fmt(": |d/dl T(l z)| at l=1 is %.3e <= 1e-10 |T| = %.3e", d, 1e-10 * std::abs(T)));
  };
  {
    const Problem prob(base_config(Target::kp0), kp_box());
    projected(prob, 1.7 * lump_sample(LumpParams{}, kp_box()), "kp0, 1.7 x lump");
    for (int k = 0; k < 3; ++k)
      projected(prob, detail::oriented(prob, oracle::random_band_limited(kp_box(), rng, 1.0, 1.0, 0.05)),
                "kp0, random band-limited field " + std::to_string(k));
  }
  {
    const Grid2D kg(256, 128, 100.0, 100.0);
    const Problem prob(base_config(Target::fdkp_direct), kg);
    const Field u = change_vars_i2_inverse(lump_sample(LumpParams{}, kg), 0.1);
    projected(prob, 0.6 * u, "fdkp_direct, 0.6 x scaled lump");
    projected(prob, detail::oriented(prob, oracle::random_band_limited(prob.grid(), rng, 0.05, 0.005, 0.01)),
              "fdkp_direct, random band-limited field");
  }
  {
    const Grid2D kg(256, 128, 100.0, 100.0);
    const Problem prob(base_config(Target::fdkp_reduced), kg);
    projected(prob, prob.constrain(0.8 * lump_sample(LumpParams{}, kg)), "fdkp_reduced, 0.8 x lump");
  }
  return r.passed();
}

// ---- 4. reduction certificate

bool criterion4(Report& r) {
  const Solved kp = run(base_config(Target::kp0), fdkp_kp_box());
  const Field& zeta = kp.gs.field;
  const SolverConfig cfg = base_config(Target::fdkp_reduced);
  TEpsOptions o;
  o.picard.tol = cfg.picard_tol;
  o.picard.max_iter = cfg.picard_max_iter;
  o.ball_radius = cfg.ball_radius;

  const SymbolTable t = build_table(fdkp_grid(zeta.grid(), 0.1), kBeta, kDelta, 0.1);
  const TEpsResult res = t_eps(project_scaled_cone(zeta, t), t, o);
  const ReductionState& st = res.state;
  r.check(st.converged, fmt("solve_u2 at (eps, delta) = (0.1, 0.3) converged in %.0f steps", double(st.log.size())));
  r.check(st.contraction < 0.45, fmt("measured contraction ratio %.4f < 0.45", st.contraction));

  const Field u = st.u1 + st.u2;
  const Field grad = *i_eps(u, 0.1, t, {}, true).gradient;
  std::mt19937_64 rng(404);
  const Multiplier off = detail::off_cone_mask(t);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Field w = oracle::random_masked(t.grid, off, rng);
    w *= 1.0 / norm(w, NormKind::x());
    worst = std::max(worst, std::abs(inner_l2(grad, w)));
  }
  r.check(worst <= 10.0 * o.picard.tol,
          fmt("off-cone stationarity over 10 unit-X directions: max |dI[u1+u2](w2)| = %.3e <= %.1e", worst, 10.0 * o.picard.tol));

  std::vector<double> eps{0.2, 0.1, 0.05}, u2;
  std::string failure;
  for (double e : eps) {
    const SymbolTable te = build_table(fdkp_grid(zeta.grid(), e), kBeta, kDelta, e);
    try {
      const ReductionState se = t_eps(project_scaled_cone(zeta, te), te, o).state;
      u2.push_back(se.u2_x_norm);
      std::printf("    eps %.3g: |u2|_X = %.6e, contraction %.4f, |u1|_eps = %.4f\n", e, se.u2_x_norm, se.contraction,
                  se.u1_eps_norm);
    } catch (const SolverError& ex) {
      failure += fmt("eps %.3g: ", e) + ex.what() + "; ";
      std::printf("    eps %.3g: %s\n", e, ex.what());
    }
  }
  if (u2.size() == eps.size()) {
    const double slope = loglog_slope(eps, u2);
    r.check(slope >= 1.6 && slope <= 2.4, fmt("log-log slope of |u2|_X over eps {0.05, 0.1, 0.2}: %.4f in [1.6, 2.4]", slope));
  } else {
    r.check(false, "log-log slope of |u2|_X over eps {0.05, 0.1, 0.2} not measurable: " + failure);
  }
  return r.passed();
}

// ---- 5. Nehari against Petviashvili

bool criterion5(Report& r) {
  struct Case {
    Target target;
    const Grid2D* box;
  };
  for (const Case& c : {Case{Target::kp0, &kp_box()}, Case{Target::fdkp_direct, &fdkp_kp_box()}}) {
    const Solved a = run(base_config(c.target), *c.box);
    const Solved b = run(base_config(c.target, Method::petviashvili), *c.box);
    const Alignment al = align(a.gs.physical, b.gs.physical);
    const std::string who = to_string(c.target);
    r.check(al.distance <= 1e-3, who + fmt(": relative L2 distance after alignment %.3e <= 1e-3", al.distance));
    r.check(a.gs.residual <= 1e-8, who + fmt(": nehari_pg steady residual %.3e <= 1e-8", a.gs.residual));
    r.check(b.gs.residual <= 1e-8, who + fmt(": petviashvili steady residual %.3e <= 1e-8", b.gs.residual));
    r.check(a.seconds <= 300.0 && b.seconds <= 300.0, who + fmt(": runtimes %.1f s and %.1f s <= 300 s", a.seconds, b.seconds));
  }
  return r.passed();
}

// ---- 6. direct against reduced

bool criterion6(Report& r) {
  const Solved d = run(base_config(Target::fdkp_direct), fdkp_kp_box());
  const Solved red = run(base_config(Target::fdkp_reduced), fdkp_kp_box());
  const Alignment al = align(d.gs.physical, red.gs.physical);
  r.check(al.distance <= 1e-3, fmt("relative L2 distance of u after alignment %.3e <= 1e-3", al.distance));
  const double dT = std::abs(d.gs.T - red.gs.T) / std::abs(d.gs.T);
  r.check(dT <= 1e-4, fmt("T_eps direct %.12g vs reduced, relative difference %.3e <= 1e-4", d.gs.T, dT));
  // I_eps of the reduced state evaluated directly on its physical field
  const Problem direct(base_config(Target::fdkp_direct), fdkp_kp_box());
  const double I = i_eps(red.gs.physical, 0.1, direct.table()).value;
  const double dI = std::abs(I - 1e-3 * red.gs.T) / std::abs(I);
  r.check(dI <= 1e-4, fmt("I_eps(u_reduced) = %.12g equals eps^3 T_eps to %.3e", I, dI));
  std::printf("    runtimes: direct %.1f s, reduced %.1f s\n", d.seconds, red.seconds);
  return r.passed();
}

// ---- 7. eps convergence

bool criterion7(Report& r) {
  const auto t0 = Clock::now();
  RunConfig rc;
  rc.sweep = {0.2, 0.1, 0.05};
  const SweepReport rep = run_sweep(rc);
  const double secs = seconds_since(t0);
  r.check(rep.complete, "every sweep row solved");
  std::printf("    c0 = %.12g\n", rep.c0);
  for (const auto& row : rep.rows)
    std::printf("    eps %.3g: c_eps %.12g, |c_eps - c0| %.4e, relative eps-norm gap %.4e\n", row.eps, row.c_eps,
                std::abs(row.c_eps - rep.c0), row.u_gap_eps_rel);
  r.check(rep.c_gap_decreasing, "|c_eps - c0| strictly decreasing as eps decreases");
  r.check(rep.u_gap_decreasing, "|u^eps - u*_eps|_eps / |u*_eps|_eps strictly decreasing as eps decreases");
  r.check(secs <= 1200.0, fmt("sweep runtime %.1f s <= 1200 s", secs));
  return r.passed();
}

// ---- 8. symbols

bool criterion8(Report& r) {
  r.check(eval_m(0.0, 0.0, kBeta) == 1.0, "m(0) = 1");

  double min_m = INFINITY;
  for (const Grid2D& g : {kp_box(), fdkp_grid(fdkp_kp_box(), 0.1), fdkp_grid(fdkp_kp_box(), 0.05)}) {
    const SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
    for (std::size_t j = 0; j < g.ny(); ++j)
      for (std::size_t i = 1; i < g.nkx(); ++i) min_m = std::min(min_m, t.m[g.spectral_index(i, j)]);
  }
  r.check(min_m >= 1.0, fmt("m >= 1 on all admissible modes of three production lattices (min %.15g)", min_m));

  std::vector<double> deltas{0.4, 0.2, 0.1, 0.05}, errs;
  for (double d : deltas) {
    double worst = 0.0;
    const int n = 400;
    for (int a = 1; a <= n; ++a) {
      const double k1 = d * a / n;
      for (int c = -n; c <= n; ++c) {
        const double k2 = d * k1 * c / n;
        if (cone_indicator(k1, k2, d)) worst = std::max(worst, std::abs(eval_m(k1, k2, kBeta) - eval_mtilde(k1, k2, kBeta)));
      }
    }
    errs.push_back(worst);
  }
  const double slope = loglog_slope(deltas, errs);
  r.check(slope >= 3.7, fmt("fit slope of max |m - mtilde| over shrinking cones %.4f >= 3.7", slope));

  double lo = INFINITY, hi = 0.0;
  const int n = 600;
  for (int a = 1; a <= n; ++a) {
    const double k1 = kDelta * a / n;
    for (int c = -n; c <= n; ++c) {
      const double k2 = kDelta * k1 * c / n;
      if (!cone_indicator(k1, k2, kDelta)) continue;
      const double q = std::sqrt((eval_m(k1, k2, kBeta) - 1.0) / (eval_mtilde(k1, k2, kBeta) - 1.0));
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
  }
  r.check(lo >= 0.9 && hi <= 1.1, fmt("(n/ntilde)^(1/2) on the delta = 0.3 cone within [%.6f, %.6f]", lo, hi));

  const Grid2D g(256, 256, 200.0, 200.0);
  const SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  std::mt19937_64 rng(8);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Field f = oracle::random_masked(g, t.chi, rng);
    const double x2 = std::pow(norm(f, NormKind::x()), 2), l2 = std::pow(norm(f, NormKind::l2()), 2);
    worst = std::max(worst, x2 / l2);
    if (!(x2 <= (1.0 + 2.0 * kDelta * kDelta) * l2)) ++bad;
  }
  r.check(bad == 0, fmt("|f|_X^2 <= (1 + 2 delta^2) |f|_L2^2 on 100 random cone fields (worst ratio %.6f, bound %.2f)", worst,
                        1.0 + 2.0 * kDelta * kDelta));
  return r.passed();
}

// ---- 9. gradients

bool criterion9(Report& r) {
  std::mt19937_64 rng(909);
  auto check_grad = [&](const std::string& name, const std::function<FunctionalValue(const Field&, bool)>& F, const Field& u,
                        const std::function<Field()>& direction) {
    const Field grad = *F(u, true).gradient;
    double worst = 0.0;
    for (int d = 0; d < 3; ++d) {
      const Field v = direction();
      const double exact = inner_l2(grad, v);
      const double fd = oracle::directional_fd([&](const Field& x) { return F(x, false).value; }, u, v, 1e-5);
      worst = std::max(worst, std::abs(exact - fd) / std::abs(exact));
    }
    r.check(worst <= 1e-6, name + fmt(": worst relative gradient error over 3 directions %.3e <= 1e-6", worst));
  };

  const Grid2D g(64, 32, 60.0, 40.0);
  const SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  const Field u = oracle::random_band_limited(g, rng, 2.0, 2.0, 0.3);
  auto band = [&] { return oracle::random_band_limited(g, rng, 2.0, 2.0, 0.3); };
  for (int p : {2, 3, 4}) {
    const Discretization disc{p, false};
    const std::string tag = " (p=" + std::to_string(p) + ")";
    check_grad("E" + tag, [&](const Field& x, bool w) { return energy_fdkp(x, t, disc, w); }, u, band);
    check_grad("I_eps" + tag, [&](const Field& x, bool w) { return i_eps(x, 0.1, t, disc, w); }, u, band);
    check_grad("T0" + tag, [&](const Field& x, bool w) { return t0(x, t, disc, w); }, u, band);
  }

  const Grid2D zg(256, 128, 100.0, 100.0);
  const SymbolTable ft = build_table(fdkp_grid(zg, 0.1), kBeta, kDelta, 0.1);
  const Field zeta = 0.5 * project_scaled_cone(lump_sample(LumpParams{}, zg), ft);
  PicardOptions po;
  po.tol = 1e-13;
  po.max_iter = 300;
  const Field u1 = change_vars_i1(change_vars_i2_inverse(zeta, 0.1, &ft.grid), ft, true);
  auto cone_dir = [&] {
    Field v = oracle::random_masked(ft.grid, ft.chi, rng);
    v *= norm(u1, NormKind::l2()) / norm(v, NormKind::l2());
    return v;
  };
  check_grad("J_eps", [&](const Field& x, bool w) { return j_eps(x, 0.1, ft, po, w).value; }, u1, cone_dir);
  TEpsOptions to;
  to.picard = po;
  auto scaled_dir = [&] {
    Field v = project_scaled_cone(oracle::random_band_limited(zg, rng, 4.0, 4.0), ft);
    v *= norm(zeta, NormKind::l2()) / norm(v, NormKind::l2());
    return v;
  };
  check_grad("T_eps", [&](const Field& x, bool w) { return t_eps(x, ft, to, w).value; }, zeta, scaled_dir);
  return r.passed();
}

// ---- 10. determinism

std::string slurp(const fs::path& p) { return detail::read_file(p); }

bool criterion10(Report& r) {
  const fs::path root = fs::temp_directory_path() / ("fdkp_acceptance_determinism_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  struct Run {
    std::string name;
    std::string args;
  };
  const std::vector<Run> runs{
      {"solve kp0 gaussian seed 7", "solve --target kp0 --nx 256 --ny 256 --initial_guess gaussian --seed 7"},
      {"solve fdkp_direct", "solve --target fdkp_direct --nx 256 --ny 128 --eps 0.1"},
      {"sweep with 3 jobs", "sweep --nx 256 --ny 128 --jobs 3"},
  };
  for (const auto& run : runs) {
    const fs::path out = root / "out";
    const fs::path first = root / "first";
    std::vector<std::string> bytes_first;
    for (int pass = 0; pass < 2; ++pass) {
      fs::remove_all(out);
      const std::string cmd = std::string("\"") + FDKP_WAVES_EXE + "\" " + run.args + " --output_dir \"" + out.string() +
                              "\" > \"" + (root / "log.txt").string() + "\" 2>&1";
      const int status = std::system(cmd.c_str());
      if (status == -1) {
        r.check(false, run.name + ": could not start " FDKP_WAVES_EXE);
        return false;
      }
      if (pass == 0) {
        fs::remove_all(first);
        fs::rename(out, first);
      }
    }
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(first)) names.insert(e.path().filename().string());
    std::set<std::string> names2;
    for (const auto& e : fs::directory_iterator(out)) names2.insert(e.path().filename().string());
    bool same = !names.empty() && names == names2;
    std::string detail;
    for (const auto& n : names) {
      const bool eq = names2.count(n) && slurp(first / n) == slurp(out / n);
      same = same && eq;
      detail += " " + n + (eq ? "" : "(differs)");
    }
    r.check(same, run.name + ": byte-identical" + detail);
  }
  fs::remove_all(root);
  return r.passed();
}

const std::vector<std::pair<std::string, std::function<bool(Report&)>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<bool(Report&)>>> list{
      {"lump residual", criterion1},
      {"Nehari identity and ray maximum", criterion2},
      {"closed-form projection", criterion3},
      {"reduction certificate", criterion4},
      {"Nehari / Petviashvili cross-solver", criterion5},
      {"direct / reduced cross-path", criterion6},
      {"eps convergence", criterion7},
      {"symbol suite", criterion8},
      {"gradient checks", criterion9},
      {"determinism", criterion10},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criterion number, 1-10 (repeatable)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (which.empty())
    for (int k = 1; k <= 10; ++k) which.push_back(k);

  bool all = true;
  for (int k : which) {
    const auto& [name, fn] = criteria()[static_cast<std::size_t>(k - 1)];
    std::printf("criterion %d: %s\n", k, name.c_str());
    std::fflush(stdout);
    Report rep;
    const auto t0 = Clock::now();
    bool ok = false;
    try {
      ok = fn(rep);
    } catch (const std::exception& e) {
      std::printf("    [FAILED] exception: %s\n", e.what());
      ok = false;
    }
    std::printf("%s criterion %d (%s) [%.1f s]\n", ok ? "PASS" : "FAIL", k, name.c_str(), seconds_since(t0));
    std::fflush(stdout);
    all = all && ok;
  }
  return all ? 0 : 1;
}
