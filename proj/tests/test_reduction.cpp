#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fdkp/lump.hpp"
#include "fdkp/reduction.hpp"
#include "oracles.hpp"

using namespace fdkp;

namespace {

const double kBeta = 7.0 / 3.0;
const double kDelta = 0.3;

// KP-scale lump profile on the zeta lattice, restricted to the scaled cone of the FDKP table.
struct ProfileCase {
  double eps;
  Grid2D zg;
  SymbolTable t;
  Field zeta;
  ProfileCase(double eps_, std::size_t nx, std::size_t ny, double L, double amp = 1.0)
      : eps(eps_), zg(nx, ny, L, L), t(build_table(fdkp_grid(zg, eps_), kBeta, kDelta, eps_)),
        zeta(project_scaled_cone(lump_sample(LumpParams{}, zg), t)) {
    zeta *= amp;
  }
  Field u1() const { return change_vars_i1(change_vars_i2_inverse(zeta, eps, &t.grid), t, true); }
};

PicardOptions tight() {
  PicardOptions o;
  o.tol = 1e-13;
  o.max_iter = 300;
  return o;
}

}  // namespace

TEST(GMap, ZeroInputs) {
  Grid2D g(64, 64, 400.0, 4000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  Field z(g);
  EXPECT_EQ(max_abs(g_map(z, z, 0.1, t)), 0.0);
}

TEST(GMap, OutputVanishesOnCone) {
  Grid2D g(64, 64, 400.0, 4000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  std::mt19937_64 rng(1);
  Field u1 = oracle::random_masked(g, t.chi, rng, 0.01);
  Field u2 = oracle::random_masked(g, detail::off_cone_mask(t), rng, 0.01);
  const Spectrum out = forward_transform(g_map(u1, u2, 0.1, t));
  for (std::size_t q = 0; q < out.data().size(); ++q)
    if (t.chi[q] > 0.0 || t.inv_n_offcone[q] == 0.0) {
      EXPECT_EQ(std::abs(out.data()[q]), 0.0);
    }
}

TEST(GMap, SingleModeClosedForm) {
  Grid2D g(64, 64, 200.0, 2000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  // k = (0.19, 0.028) lies in the cone, 2k has |k| > delta
  const std::size_t i = 6, j = 9;
  ASSERT_GT(t.chi[g.spectral_index(i, j)], 0.0);
  ASSERT_EQ(t.chi[g.spectral_index(2 * i, 2 * j)], 0.0);
  const cplx c(0.3, -0.2);
  Spectrum s(g);
  s(i, j) = c;
  const Field out = g_map(Field::from_spectrum(s), Field(g), 0.1, t);
  const Spectrum oh = forward_transform(out);
  const double norm_c = 1.0 / std::sqrt(g.lx() * g.ly());
  const cplx expected = -c * c * norm_c / t.n[g.spectral_index(2 * i, 2 * j)];
  for (std::size_t jj = 0; jj < g.ny(); ++jj)
    for (std::size_t ii = 0; ii < g.nkx(); ++ii) {
      const cplx want = (ii == 2 * i && jj == 2 * j) ? expected : cplx(0.0, 0.0);
      EXPECT_LT(std::abs(oh(ii, jj) - want), 1e-15) << ii << "," << jj;
    }
}

TEST(SolveU2, ZeroInputConvergesInOneStep) {
  Grid2D g(64, 64, 400.0, 4000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  ReductionState st = solve_u2(Field(g), 0.1, t, 1e-12, 50);
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.log.size(), 1u);
  EXPECT_EQ(max_abs(st.u2), 0.0);
}

TEST(SolveU2, FixedPointCertificateAndExactSupports) {
  ProfileCase pc(0.1, 256, 128, 100.0);
  const PicardOptions o = tight();
  ReductionState st = solve_u2(pc.u1(), 0.1, pc.t, o);
  ASSERT_TRUE(st.converged);
  EXPECT_LT(st.contraction, 1.0);
  EXPECT_LE(st.fixed_point_defect, o.tol);
  EXPECT_LE(st.system_residual_z, 10 * o.tol);
  const Spectrum a = forward_transform(st.u1), b = forward_transform(st.u2);
  for (std::size_t q = 0; q < a.data().size(); ++q) {
    EXPECT_EQ(std::abs((pc.t.chi[q] == 0.0 ? a : b).data()[q]), 0.0);
  }
  // the residual of the off-cone equation coincides with G's fixed-point defect up to n
  Field again = g_map(st.u1, st.u2, 0.1, pc.t);
  EXPECT_LE(norm(again - st.u2, NormKind::x()), o.tol);
}

TEST(SolveU2, QuadraticGrowth) {
  ProfileCase small(0.1, 256, 128, 100.0, 0.1);
  ProfileCase twice(0.1, 256, 128, 100.0, 0.2);
  const double a = solve_u2(small.u1(), 0.1, small.t, tight()).u2_x_norm;
  const double b = solve_u2(twice.u1(), 0.1, twice.t, tight()).u2_x_norm;
  EXPECT_NEAR(b / a, 4.0, 0.8);
}

TEST(SolveU2, RejectsOffConeInput) {
  Grid2D g(64, 64, 400.0, 4000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  std::mt19937_64 rng(3);
  Field bad = oracle::random_masked(g, detail::off_cone_mask(t), rng);
  EXPECT_THROW(solve_u2(bad, 0.1, t, 1e-12, 50), InvalidArgument);
}

TEST(SolveU2, NonContractionIsReported) {
  ProfileCase pc(0.2, 256, 128, 100.0, 30.0);
  EXPECT_THROW(
      {
        try {
          solve_u2(pc.u1(), 0.2, pc.t, 1e-12, 200);
        } catch (const SolverError& e) {
          EXPECT_EQ(e.kind(), SolverFailure::diverged);
          EXPECT_NE(std::string(e.what()).find("eps=0.2"), std::string::npos);
          throw;
        }
      },
      SolverError);
}

TEST(JEps, ZeroAndOrthogonality) {
  ProfileCase pc(0.1, 256, 128, 100.0);
  EXPECT_EQ(j_eps(Field(pc.t.grid), 0.1, pc.t).value.value, 0.0);
  JEpsResult r = j_eps(pc.u1(), 0.1, pc.t, tight());
  EXPECT_LE(r.orthogonality, 1e-12);
  EXPECT_NEAR(r.value.value, r.value.Q + r.value.S + r.value.remainder, 1e-12 * std::abs(r.value.value));
}

TEST(JEps, StationaryInOffConeDirections) {
  ProfileCase pc(0.1, 256, 128, 100.0);
  const PicardOptions o = tight();
  JEpsResult r = j_eps(pc.u1(), 0.1, pc.t, o);
  Field u = r.state.u1 + r.state.u2;
  const Field grad = *i_eps(u, 0.1, pc.t, {}, true).gradient;
  std::mt19937_64 rng(17);
  const Multiplier off = detail::off_cone_mask(pc.t);
  for (int k = 0; k < 10; ++k) {
    Field w = oracle::random_masked(pc.t.grid, off, rng);
    w *= 1.0 / norm(w, NormKind::x());
    EXPECT_LE(std::abs(inner_l2(grad, w)), 10 * o.tol);
  }
}

TEST(JEps, GradientMatchesDifferences) {
  ProfileCase pc(0.1, 256, 128, 100.0, 0.5);
  const PicardOptions o = tight();
  const Field u1 = pc.u1();
  const Field grad = *j_eps(u1, 0.1, pc.t, o, true).value.gradient;
  std::mt19937_64 rng(19);
  for (int k = 0; k < 3; ++k) {
    Field v = oracle::random_masked(pc.t.grid, pc.t.chi, rng);
    v *= norm(u1, NormKind::l2()) / norm(v, NormKind::l2());
    const double exact = inner_l2(grad, v);
    const double fd = oracle::directional_fd([&](const Field& x) { return j_eps(x, 0.1, pc.t, o).value.value; }, u1, v, 1e-5);
    EXPECT_LE(std::abs(exact - fd), 1e-6 * std::abs(exact));
  }
}

TEST(JEps, RemainderScalesLikeEpsSquaredTimesFourthPower) {
  std::vector<double> c;
  for (double eps : {0.1, 0.05, 0.025}) {
    ProfileCase pc(eps, 256, 128, 100.0);
    JEpsResult r = j_eps(pc.u1(), eps, pc.t, tight());
    const double n4 = std::pow(r.state.u1_eps_norm, 4);
    c.push_back(std::abs(r.value.remainder) / (eps * eps * n4));
  }
  const double hi = *std::max_element(c.begin(), c.end());
  RecordProperty("remainder_constant_max", std::to_string(hi));
  EXPECT_LT(hi, 1.0);
  // an upper bound: the ratio must not grow as eps shrinks
  EXPECT_LE(c[2], c[0] * 1.5) << c[0] << " " << c[1] << " " << c[2];
}

TEST(ChangeVars, I1RoundTripAndDistortion) {
  Grid2D g(128, 64, 400.0, 4000.0);
  SymbolTable t = build_table(g, kBeta, kDelta, 0.1);
  std::mt19937_64 rng(23);
  Field u = oracle::random_masked(g, t.chi, rng);
  Field back = change_vars_i1(change_vars_i1(u, t, false), t, true);
  double err = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) err = std::max(err, std::abs(back.values()[q] - u.values()[q]));
  EXPECT_LE(err, 1e-12 * max_abs(u));
  EXPECT_EQ(max_abs(change_vars_i1(Field(g), t, false)), 0.0);
  const double ratio = norm(change_vars_i1(u, t, false), NormKind::l2()) / norm(u, NormKind::l2());
  EXPECT_NEAR(ratio, 1.0, 0.1);
}

TEST(ChangeVars, I2NormIdentityAndRelabeling) {
  const double eps = 0.1;
  Grid2D fg(128, 64, 1000.0, 10000.0);
  SymbolTable t = build_table(fg, kBeta, kDelta, eps);
  std::mt19937_64 rng(29);
  Field ut = oracle::random_masked(fg, t.chi, rng);
  Field z = change_vars_i2(ut, eps, &t);
  EXPECT_EQ(z.grid(), Grid2D(128, 64, 100.0, 100.0));
  const double lhs = std::pow(norm(ut, NormKind::epsilon(eps, kBeta)), 2);
  const double rhs = eps * std::pow(norm(z, NormKind::ytilde(kBeta)), 2);
  EXPECT_NEAR(lhs, rhs, 1e-10 * lhs);
  // index-by-index: coefficient at (i, j) maps to (i, j) with factor eps^{-1/2}
  const Spectrum a = forward_transform(ut), b = forward_transform(z);
  for (std::size_t q = 0; q < a.data().size(); ++q) EXPECT_LT(std::abs(b.data()[q] - a.data()[q] / std::sqrt(eps)), 1e-13);
  Field back = change_vars_i2_inverse(z, eps, &fg);
  for (std::size_t q = 0; q < fg.size(); ++q) EXPECT_NEAR(back.values()[q], ut.values()[q], 1e-15);
  EXPECT_EQ(max_abs(change_vars_i2(Field(fg), eps)), 0.0);
  Grid2D wrong(128, 64, 999.0, 10000.0);
  EXPECT_THROW(change_vars_i2_inverse(z, eps, &wrong), InvalidArgument);
}

TEST(ChangeVars, ScaledLumpRelabelsToUnitLump) {
  const double eps = 0.1;
  Grid2D zg(256, 256, 100.0, 100.0);
  Grid2D fg = fdkp_grid(zg, eps);
  Field scaled = lump_sample(LumpParams{kBeta, eps}, fg);
  Field z = change_vars_i2(scaled, eps);
  Field unit = lump_sample(LumpParams{kBeta, 1.0}, zg);
  for (std::size_t q = 0; q < zg.size(); ++q) EXPECT_NEAR(z.values()[q], unit.values()[q], 1e-10);
}

TEST(TEps, ZeroAndChainConsistency) {
  ProfileCase pc(0.1, 256, 128, 100.0);
  TEpsOptions o;
  o.picard = tight();
  EXPECT_EQ(t_eps(Field(pc.zg), pc.t, o).value.value, 0.0);
  TEpsResult r = t_eps(pc.zeta, pc.t, o);
  const double direct = i_eps(r.state.u1 + r.state.u2, 0.1, pc.t).value / std::pow(0.1, 3);
  EXPECT_NEAR(r.value.value, direct, 1e-10 * std::abs(direct));
  EXPECT_NEAR(r.value.Q, 0.5 * std::pow(norm(pc.zeta, NormKind::ytilde(kBeta)), 2), 1e-12 * r.value.Q);
}

TEST(TEps, ApproachesKpFunctionalAsEpsShrinks) {
  std::vector<double> gaps, cs;
  for (double eps : {0.1, 0.05, 0.025}) {
    ProfileCase pc(eps, 256, 128, 100.0);
    TEpsOptions o;
    o.picard = tight();
    TEpsResult r = t_eps(pc.zeta, pc.t, o);
    SymbolTable kt = build_table(pc.zg, kBeta, kDelta, eps);
    gaps.push_back(std::abs(r.value.value - t0(pc.zeta, kt).value));
    cs.push_back(std::abs(r.value.remainder) / (std::sqrt(eps) * std::pow(r.ytilde_norm, 2)));
  }
  EXPECT_GT(gaps[0], gaps[1]);
  EXPECT_GT(gaps[1], gaps[2]);
  const double c = *std::max_element(cs.begin(), cs.end());
  RecordProperty("remainder_constant", std::to_string(c));
  EXPECT_LT(c, 1.0);
}

TEST(TEps, GradientMatchesDifferences) {
  ProfileCase pc(0.1, 256, 128, 100.0, 0.5);  // away from the critical point
  TEpsOptions o;
  o.picard = tight();
  const Field grad = *t_eps(pc.zeta, pc.t, o, true).value.gradient;
  std::mt19937_64 rng(31);
  for (int k = 0; k < 3; ++k) {
    Field v = project_scaled_cone(oracle::random_band_limited(pc.zg, rng, 4.0, 4.0), pc.t);
    v *= norm(pc.zeta, NormKind::l2()) / norm(v, NormKind::l2());
    const double exact = inner_l2(grad, v);
    const double fd = oracle::directional_fd([&](const Field& x) { return t_eps(x, pc.t, o).value.value; }, pc.zeta, v, 1e-5);
    EXPECT_LE(std::abs(exact - fd), 1e-6 * std::abs(exact));
  }
}

TEST(TEps, BallViolation) {
  ProfileCase pc(0.1, 256, 128, 100.0);
  TEpsOptions o;
  o.ball_radius = 5.0;
  try {
    t_eps(pc.zeta, pc.t, o);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverFailure::ball_violation);
  }
}
