// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "pinchflow/pinchflow.hpp"

using namespace pinchflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int number, const char* name, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = Clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.passed = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  if (!out.passed) ++failures;
  std::printf("%s criterion %d: %s (%.2f s)%s\n", out.passed ? "PASS" : "FAIL", number, name, seconds_since(start),
              out.detail.str().c_str());
  std::fflush(stdout);
}

VerificationReport run_property(const char* id, Dims dims, std::uint64_t count, double tol,
                                PinchingParams params = {}) {
  SampleSpec spec;
  spec.dims = dims;
  spec.count = count;
  spec.seed = 20240601;
  spec.params = params;
  return verify_property(id, spec, tol);
}

CurvatureData diagonal(const std::vector<double>& diag) {
  const int n = static_cast<int>(diag.size());
  auto d = zero_curvature({n, 1});
  for (int i = 0; i < n; ++i) d.set(i, i, 0, diag[i]);
  d.H = trace_normal(d.dims, d.A);
  return d;
}

ExactSpec sphere_spec() {
  ExactSpec s;
  s.kind = ExactKind::Sphere;
  s.dims = {5, 1};
  s.r0 = 1.0;
  return s;
}

ExactSpec cylinder_spec() {
  ExactSpec s;
  s.kind = ExactKind::Cylinder;
  s.dims = {8, 1};
  s.m = 1;
  s.r0 = 1.0;
  return s;
}

ExactSpec product_spec() {
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

int main() {
  criterion(1, "eigenvalue identity for symmetric matrices", [](Outcome& o) {
    const auto start = Clock::now();
    for (int n : {2, 5, 8}) {
      const auto r = run_property("poincare_identity", {n, 1}, 10000, 1e-10);
      o.detail << " n=" << n << " worst=" << r.worst_margin;
      o.require(r.passed(), "n=" + std::to_string(n));
    }
    const double t = seconds_since(start);
    o.require(t < 5.0, "runtime " + std::to_string(t) + " s");
  });

  criterion(2, "codimension-one Simons exactness", [](Outcome& o) {
    const auto r = run_property("simons_codim1_exact", {5, 1}, 10000, 1e-9);
    o.detail << " worst=" << r.worst_margin;
    o.require(r.passed(), "sampled identity");
    const auto e = simons_E(diagonal({2, 1, 1, 1, 1}));
    o.detail << " |E|^2=" << e.normE2;
    o.require(std::abs(e.normE2 - 128.0) <= 1e-9 * 128.0, "diag(2,1,1,1,1) gives 128");
    o.require(std::abs(*e.lower_bound - 128.0) <= 1e-9 * 128.0, "lower bound 128");
  });

  criterion(3, "gradient inequality on Codazzi tensors", [](Outcome& o) {
    for (int n : {5, 8})
      for (int k : {1, 2}) {
        const auto r = run_property("gradient_ineq", {n, k}, 100000, 1e-12);
        o.detail << " (" << n << "," << k << ")=" << r.worst_margin;
        o.require(r.passed(), "n=" + std::to_string(n) + " k=" + std::to_string(k));
      }
    for (int n : {5, 8}) {
      GradientTensor g{{n, 1}, std::vector<double>(static_cast<std::size_t>(n) * n * n, 0.0)};
      std::vector<double> xi(n);
      for (int i = 0; i < n; ++i) xi[i] = std::sin(1.0 + i);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int p = 0; p < n; ++p) g.S[g.index(i, j, p, 0)] = xi[i] * (j == p) + xi[j] * (i == p) + xi[p] * (i == j);
      const auto pair = gradient_pair(g);
      const double ratio = pair.normS2 / pair.normdH2;
      o.detail << " xi(" << n << ") ratio-3/(n+2)=" << ratio - 3.0 / (n + 2);
      o.require(std::abs(ratio - 3.0 / (n + 2)) <= 1e-12, "xi-family ratio n=" + std::to_string(n));
    }
  });

  criterion(4, "pinching reaction inequality", [](Outcome& o) {
    const auto start = Clock::now();
    PinchingParams p;
    p.c = 0.25;
    p.a = 0.1;
    const auto r = run_property("pinch_reaction", {5, 2}, 1000000, 1e-9, p);
    o.detail << " worst=" << r.worst_margin << " violations=" << r.violation_count;
    o.require(r.passed(), "sampled inequality");
    const auto b = pinch_bound_rhs(diagonal({1, 1, 1, 1, 1}), p);
    o.detail << " sphere lhs=" << b.lhs << " rhs=" << b.rhs;
    o.require(std::abs(b.lhs + 12.5) <= 1e-12 && std::abs(b.rhs + 12.5) <= 1e-12, "sphere equality at -12.5");
    const double t = seconds_since(start);
    o.require(t < 300.0, "runtime " + std::to_string(t) + " s");
  });

  criterion(5, "pinching coefficient signs", [](Outcome& o) {
    const auto r = run_property("coefficient_signs", {5, 2}, 1000, 0.0);
    o.detail << " samples=" << r.samples << " worst=" << r.worst_margin;
    o.require(r.samples == 8000, "8 dimensions x 1000 points");
    o.require(r.passed(), "nonpositive coefficients");
  });

  criterion(6, "exact flows", [](Outcome& o) {
    for (const auto& spec : {sphere_spec(), product_spec()}) {
      const double T = singular_time(spec);
      const auto rk = evolve_exact(spec, {T / 2}, ExactMethod::RK4, 1e-5);
      const auto cf = evolve_exact(spec, {T / 2}, ExactMethod::ClosedForm);
      double err = 0.0;
      for (std::size_t j = 0; j < cf.radii[0].size(); ++j)
        err = std::max(err, std::abs(rk.radii[0][j] - cf.radii[0][j]));
      o.detail << " T=" << T << " rk4_err=" << err;
      o.require(err <= 1e-8, "RK4 at T/2");
    }
    o.require(std::abs(singular_time(sphere_spec()) - 0.1) < 1e-15, "sphere T = 0.1");
    o.require(std::abs(singular_time(product_spec()) - 1.0 / 14.0) < 1e-15, "product T = 1/14");
    for (const auto& [spec, params] :
         std::vector<std::pair<ExactSpec, PinchingParams>>{{sphere_spec(), {}}, {cylinder_spec(), cylinder_params()}}) {
      const auto diag = flow_diagnostics(evolve_exact(spec, geometric_times(singular_time(spec), 200)), params);
      double worst = 0.0;
      for (const auto& row : diag.rows) worst = std::max(worst, std::abs(row.typeI_quantity - 0.5));
      o.detail << " typeI_dev=" << worst;
      o.require(worst <= 1e-6, "type I quantity 0.5");
    }
  });

  criterion(7, "codimension ratio monotonicity", [](Outcome& o) {
    const auto traj = evolve_exact(product_spec(), geometric_times(singular_time(product_spec()), 400));
    const auto diag = flow_diagnostics(traj, product_params());
    const double eta = largest_monotone_eta(traj);
    o.detail << " eta=0.01 monotone=" << diag.codim_ratio_nonincreasing << " largest_monotone_eta=" << eta;
    o.require(diag.codim_ratio_nonincreasing, "non-increasing at eta = 0.01");
    o.require(eta > 0.0, "largest monotone eta > 0");
  });

  criterion(8, "pinching preserved along exact flows", [](Outcome& o) {
    const std::vector<std::pair<ExactSpec, PinchingParams>> cases{
        {sphere_spec(), {}}, {cylinder_spec(), cylinder_params()}, {product_spec(), product_params()}};
    for (const auto& [spec, params] : cases) {
      const auto diag = flow_diagnostics(evolve_exact(spec, geometric_times(singular_time(spec), 400)), params);
      double maxQ = -std::numeric_limits<double>::infinity(), minW = std::numeric_limits<double>::infinity();
      for (const auto& row : diag.rows) {
        maxQ = std::max(maxQ, row.Q);
        minW = std::min(minW, row.W - params.eps0 / 2.0 * row.H2);
      }
      o.detail << " maxQ=" << maxQ << " min(W-eps0/2|H|^2)=" << minW;
      o.require(maxQ <= 0.0, "Q <= 0");
      o.require(minW >= 0.0 && diag.w_lower_bound, "W lower bound");
    }
  });

  GridTrajectory grid_run;
  criterion(9, "grid flow cross-validation", [&](Outcome& o) {
    const auto torus = build_torus(1.0, 2.0, 64, 2);
    const auto geo = geometry(torus);
    double err = std::abs(geo.total_area - 8 * std::numbers::pi * std::numbers::pi) / (8 * std::numbers::pi * std::numbers::pi);
    const double H = std::sqrt(1.25);
    for (const auto& pt : geo.points) {
      const auto dec = decompose(pt.curv);
      err = std::max({err, std::abs(pt.A2 - 1.25) / 1.25, std::abs(pt.H2 - 1.25) / 1.25,
                      std::abs(dec.normAhat2 - 0.4) / 0.4,
                      std::abs(eigenvalues(dec.h).front() - 0.25 / H) / (0.25 / H)});
    }
    o.detail << " geometry_err=" << err;
    o.require(err <= 1e-5, "geometry fields");

    const auto start = Clock::now();
    GridControls c;
    c.snapshot_every = 0.05;
    grid_run = evolve_grid(torus, c);
    const double wall = seconds_since(start);
    double radius_err = 0.0, area_err = 0.0;
    const auto& rec = grid_run.records;
    for (std::size_t i = 0; i < rec.size() && rec[i].t <= 0.4; ++i) {
      radius_err = std::max({radius_err, std::abs(rec[i].radii[0] - std::sqrt(1.0 - 2 * rec[i].t)),
                             std::abs(rec[i].radii[1] - std::sqrt(4.0 - 2 * rec[i].t))});
      if (i + 1 < rec.size() && rec[i + 1].t <= 0.4) {
        const double rate = (rec[i + 1].area - rec[i].area) / (rec[i + 1].t - rec[i].t);
        const double expected = -0.5 * (rec[i].integral_H2 + rec[i + 1].integral_H2);
        area_err = std::max(area_err, std::abs(rate - expected) / std::abs(expected));
      }
    }
    o.detail << " radius_err=" << radius_err << " area_variation_err=" << area_err << " steps=" << rec.size() - 1
             << " stop=" << to_string(grid_run.stop) << " wall=" << wall << "s";
    o.require(rec.back().t > 0.4, "run reaches t = 0.4");
    o.require(radius_err <= 1e-4, "radii track the ODE");
    o.require(area_err <= 1e-3, "area first variation");
    o.require(wall < 180.0, "full run under 3 minutes");
  });

  criterion(10, "rescaling normalisation and type classification", [&](Outcome& o) {
    if (grid_run.snapshots.empty()) throw Error(ErrorCode::InvalidData, "grid run unavailable");
    std::vector<double> schedule;
    for (const auto& s : grid_run.snapshots) schedule.push_back(s.grid.t);
    const auto seq = rescale_sequence(grid_run, schedule);
    double worst = 0.0;
    for (const auto& r : seq) worst = std::max(worst, std::abs(r.center_H - 1.0));
    o.detail << " snapshots=" << seq.size() << " max||H|-1|=" << worst;
    o.require(worst <= 1e-10, "|H| = 1 at every center");
    for (const auto& spec : {sphere_spec(), cylinder_spec()}) {
      const auto c = classify_type(history(evolve_exact(spec, geometric_times(singular_time(spec), 200))));
      o.detail << " " << to_string(c.verdict) << " C=" << (c.C ? *c.C : std::nan(""));
      o.require(c.verdict == SingularityType::TypeI && c.C && std::abs(*c.C - 0.5) <= 1e-6, "type I with C = 0.5");
    }
    const auto g = classify_type(history(grid_run));
    o.detail << " grid_torus=" << to_string(g.verdict);
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
