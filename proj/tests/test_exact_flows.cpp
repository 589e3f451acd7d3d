#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pinchflow/exact_flows.hpp"
#include "pinchflow/grid_flow.hpp"
#include "pinchflow/reaction.hpp"
#include "support.hpp"

using namespace pinchflow;

namespace {

ExactSpec sphere5() {
  ExactSpec s;
  s.kind = ExactKind::Sphere;
  s.dims = {5, 1};
  s.r0 = 1.0;
  return s;
}

ExactSpec cylinder8() {
  ExactSpec s;
  s.kind = ExactKind::Cylinder;
  s.dims = {8, 1};
  s.m = 1;
  s.r0 = 1.0;
  return s;
}

ExactSpec product17() {
  ExactSpec s;
  s.kind = ExactKind::Product;
  s.dims = {8, 2};
  s.p = 1;
  s.q = 7;
  s.a0 = 10.0;
  s.b0 = 1.0;
  return s;
}

PinchingParams product_params() {
  PinchingParams p;
  p.c = 0.16;
  p.a = 0.5;
  p.eps0 = 1.0 / 160.0;
  return p;
}

PinchingParams cylinder_params() {
  PinchingParams p;
  p.c = 0.15;
  p.a = 0.1;
  return p;
}

}  // namespace

TEST(ExactState, Sphere) {
  const auto d = exact_state(sphere5(), {1.0});
  const auto dec = decompose(d);
  EXPECT_NEAR(dec.normA2, 5.0, 1e-14);
  EXPECT_NEAR(dec.H1, 5.0, 1e-14);
  EXPECT_NEAR(eigenvalues(dec.h).front(), 1.0, 1e-14);
  const auto d2 = exact_state(sphere5(), {0.5});
  EXPECT_NEAR(norm2(d2.A), 5.0 / 0.25, 1e-13);
}

TEST(ExactState, Cylinder) {
  const auto dec = decompose(exact_state(cylinder8(), {1.0}));
  EXPECT_NEAR(dec.normA2, 7.0, 1e-14);
  EXPECT_NEAR(dec.H1 * dec.H1, 49.0, 1e-12);
  EXPECT_NEAR(eigenvalues(dec.h).front(), 0.0, 1e-15);
  EXPECT_NEAR(dec.normA2 / (dec.H1 * dec.H1), 1.0 / 7.0, 1e-15);
}

TEST(ExactState, Product) {
  const auto dec = decompose(exact_state(product17(), {10.0, 1.0}));
  const auto ref = oracle::product(1, 7, 10.0, 1.0);
  EXPECT_NEAR(dec.H1 * dec.H1, 49.01, 1e-12);
  EXPECT_NEAR(dec.normAhat2, ref.Ahat2, 1e-15);
  EXPECT_NEAR(dec.normAhat2, 0.0114263, 1e-7);
  EXPECT_NEAR(eigenvalues(dec.h).front(), 0.00142843, 1e-8);
  EXPECT_NEAR(dec.normA2, ref.A2, 1e-13);
}

TEST(ExactState, Errors) {
  auto p = product17();
  p.dims.k = 1;
  try {
    exact_state(p, {10.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadSpec);
  }
  p = product17();
  p.q = 6;
  EXPECT_THROW(validate(p), Error);
  EXPECT_THROW(exact_state(sphere5(), {-1.0}), Error);
  auto c = cylinder8();
  c.m = 8;
  EXPECT_THROW(validate(c), Error);
}

TEST(EvolveExact, ClosedFormValues) {
  EXPECT_NEAR(singular_time(sphere5()), 0.1, 1e-16);
  EXPECT_NEAR(singular_time(product17()), 1.0 / 14.0, 1e-16);
  EXPECT_NEAR(singular_time(cylinder8()), 1.0 / 14.0, 1e-16);
  const auto t = evolve_exact(sphere5(), {0.0, 0.05});
  EXPECT_NEAR(t.radii[1][0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(t.radii[1][0], 0.7071068, 1e-7);
  const auto p = evolve_exact(product17(), {0.05});
  EXPECT_NEAR(p.radii[0][1], std::sqrt(1.0 - 14 * 0.05), 1e-15);
  EXPECT_NEAR(p.radii[0][0], std::sqrt(100.0 - 2 * 0.05), 1e-14);
}

TEST(EvolveExact, RK4MatchesClosedForm) {
  for (const auto& spec : {sphere5(), product17(), cylinder8()}) {
    const double T = singular_time(spec);
    const std::vector<double> times{0.1 * T, 0.5 * T, 0.9 * T};
    const auto rk = evolve_exact(spec, times, ExactMethod::RK4, 1e-5);
    const auto cf = evolve_exact(spec, times, ExactMethod::ClosedForm);
    for (std::size_t i = 0; i < times.size(); ++i)
      for (std::size_t j = 0; j < rk.radii[i].size(); ++j) EXPECT_LE(std::abs(rk.radii[i][j] - cf.radii[i][j]), 1e-8);
  }
}

TEST(EvolveExact, TimeBeyondSingularity) {
  try {
    evolve_exact(sphere5(), {0.0, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeBeyondSingularity);
  }
  EXPECT_NO_THROW(evolve_exact(sphere5(), {time_cutoff(0.1)}));
  EXPECT_THROW(evolve_exact(sphere5(), {0.05, 0.01}), Error);
}

TEST(FlowDiagnostics, TypeIQuantityIsOneHalf) {
  PinchingParams sp;
  for (const auto& [spec, params] :
       std::vector<std::pair<ExactSpec, PinchingParams>>{{sphere5(), sp}, {cylinder8(), cylinder_params()}}) {
    const auto traj = evolve_exact(spec, geometric_times(singular_time(spec), 300));
    const auto diag = flow_diagnostics(traj, params);
    for (const auto& row : diag.rows) EXPECT_NEAR(row.typeI_quantity, 0.5, 0.5e-6);
    if (spec.kind == ExactKind::Cylinder)
      for (const auto& row : diag.rows) {
        EXPECT_NEAR(row.lambda1_over_H, 0.0, 1e-15);
        // lambda_1 >= -eps|H| - C holds with margin eps|H| + C
        const double eps = 0.1, C = 0.3, H = std::sqrt(row.H2);
        EXPECT_NEAR(row.lambda1_over_H * H - (-eps * H - C), eps * H + C, 1e-12 * (1 + H));
      }
  }
}

TEST(FlowDiagnostics, PinchingPreservedOnModelTrajectories) {
  const std::vector<std::pair<ExactSpec, PinchingParams>> cases{
      {sphere5(), PinchingParams{}}, {cylinder8(), cylinder_params()}, {product17(), product_params()}};
  for (const auto& [spec, params] : cases) {
    const auto traj = evolve_exact(spec, geometric_times(singular_time(spec), 400));
    const auto diag = flow_diagnostics(traj, params);
    ASSERT_LE(diag.rows.front().Q, 0.0);
    EXPECT_TRUE(diag.q_sign_preserved);
    EXPECT_TRUE(diag.w_lower_bound);
    for (const auto& row : diag.rows) {
      EXPECT_LE(row.Q, 1e-10);
      EXPECT_GE(row.W, params.eps0 / 2.0 * row.H2 * (1 - 1e-12));
    }
  }
  const auto diag = flow_diagnostics(evolve_exact(product17(), {0.0}), product_params());
  EXPECT_NEAR(diag.rows[0].Q, -0.3316, 1e-12);
}

TEST(FlowDiagnostics, CodimRatioNonIncreasingOnProduct) {
  const auto traj = evolve_exact(product17(), geometric_times(1.0 / 14.0, 400));
  const auto diag = flow_diagnostics(traj, product_params());
  EXPECT_TRUE(diag.codim_ratio_nonincreasing);
  // oracle: the closed-form ratio along b(t) = sqrt(1 - 14 t), a(t) = sqrt(100 - 2 t)
  for (const auto& row : diag.rows) {
    const auto ref = oracle::product(1, 7, std::sqrt(100 - 2 * row.t), std::sqrt(1 - 14 * row.t));
    EXPECT_NEAR(row.codim_ratio, ref.Ahat2 / std::pow(ref.H2, 0.99), 1e-12 * (1 + row.codim_ratio));
  }
  const double eta = largest_monotone_eta(traj);
  EXPECT_GE(eta, 0.01);
  EXPECT_LE(eta, 1.0);
}

TEST(FlowDiagnostics, MeanCurvatureEvolutionMatchesReactionTerm) {
  // on homogeneous solutions d|H|^2/dt = 2|<A,H>|^2
  const auto spec = sphere5();
  for (double t : {0.01, 0.05, 0.09}) {
    const double dt = 1e-4 * (singular_time(spec) - t);
    const auto traj = evolve_exact(spec, {t - dt, t, t + dt});
    auto H2 = [&](int i) { return norm2(traj.states[i].H); };
    const double fd = (H2(2) - H2(0)) / (2 * dt);
    const double exact = 2.0 * inner_AH_norm2(traj.states[1]);
    EXPECT_LE(std::abs(fd - exact), 1e-6 * exact);
  }
}

TEST(ClassifyType, ExactSphereAndCylinderAreTypeIHalf) {
  for (const auto& spec : {sphere5(), cylinder8()}) {
    const auto traj = evolve_exact(spec, geometric_times(singular_time(spec), 200));
    const auto c = classify_type(history(traj));
    EXPECT_EQ(c.verdict, SingularityType::TypeI);
    ASSERT_TRUE(c.C.has_value());
    EXPECT_NEAR(*c.C, 0.5, 1e-6);
    EXPECT_NEAR(c.T_est, singular_time(spec), 1e-9);
  }
}

TEST(ClassifyType, InsufficientData) {
  const auto traj = evolve_exact(sphere5(), geometric_times(0.1, 10));
  try {
    classify_type(history(traj));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(ClassifyType, SyntheticTypeII) {
  // max|A|^2 = 1/(T - t)^2 grows faster than the type I rate
  CurvatureHistory h;
  for (int i = 0; i < 200; ++i) {
    const double gap = std::pow(10.0, -6.0 * i / 199.0);
    h.t.push_back(1.0 - gap);
    h.max_A2.push_back(1.0 / (gap * gap));
  }
  EXPECT_EQ(classify_type(h).verdict, SingularityType::TypeII);
}

TEST(ExactCsv, ColumnsAndTypeIColumn) {
  const auto spec = sphere5();
  std::vector<double> times;
  for (int i = 0; i < 100; ++i) times.push_back(i * 1e-3);
  const auto diag = flow_diagnostics(evolve_exact(spec, times), PinchingParams{});
  std::ostringstream os;
  write_csv(os, spec, diag);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,r,Q,W,lambda1_over_H,f,f_sigma,codim_ratio,typeI_quantity");
  int rows = 0;
  while (std::getline(is, line)) {
    const double q = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_NEAR(q, 0.5, 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, 100);
}
