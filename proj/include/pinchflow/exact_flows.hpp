#pragma once

// Homothetically shrinking model solutions: round spheres S^n(r), generalised
// cylinders R^m x S^{n-m}(r) and products S^p(a) x S^q(b) in codimension >= 2.
// Each is homogeneous, so a single point's curvature data represents the
// whole submanifold at a given time.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pinchflow/csv.hpp"
#include "pinchflow/error.hpp"
#include "pinchflow/geometry.hpp"

namespace pinchflow {

enum class ExactKind { Sphere, Cylinder, Product };

struct ExactSpec {
  ExactKind kind = ExactKind::Sphere;
  Dims dims{5, 1};
  double r0 = 1.0;  ///< sphere and cylinder radius
  int m = 1;        ///< flat factor dimension of the cylinder
  int p = 1;        ///< product factor dimensions, p + q = n
  int q = 1;
  double a0 = 1.0;  ///< product factor radii
  double b0 = 1.0;
};

inline void validate(const ExactSpec& s) {
  validate(s.dims);
  switch (s.kind) {
    case ExactKind::Sphere:
      if (!(s.r0 > 0.0)) throw Error(ErrorCode::BadSpec, "sphere radius must be positive");
      break;
    case ExactKind::Cylinder:
      if (!(s.r0 > 0.0)) throw Error(ErrorCode::BadSpec, "cylinder radius must be positive");
      if (s.m < 1 || s.m > s.dims.n - 1) throw Error(ErrorCode::BadSpec, "cylinder needs 1 <= m <= n-1");
      break;
    case ExactKind::Product:
      if (s.dims.k < 2) throw Error(ErrorCode::BadSpec, "a product of spheres needs codimension >= 2");
      if (s.p < 1 || s.q < 1 || s.p + s.q != s.dims.n) throw Error(ErrorCode::BadSpec, "product needs p + q = n");
      if (!(s.a0 > 0.0 && s.b0 > 0.0)) throw Error(ErrorCode::BadSpec, "product radii must be positive");
      break;
  }
}

/// Dimensions of the shrinking sphere factors; each radius obeys
/// d(r^2)/dt = -2 * rate.
inline std::vector<int> shrink_rates(const ExactSpec& s) {
  switch (s.kind) {
    case ExactKind::Sphere: return {s.dims.n};
    case ExactKind::Cylinder: return {s.dims.n - s.m};
    case ExactKind::Product: return {s.p, s.q};
  }
  return {};
}

inline std::vector<double> initial_radii(const ExactSpec& s) {
  if (s.kind == ExactKind::Product) return {s.a0, s.b0};
  return {s.r0};
}

inline std::vector<std::string> radius_names(const ExactSpec& s) {
  if (s.kind == ExactKind::Product) return {"a", "b"};
  return {"r"};
}

inline double singular_time(const ExactSpec& s) {
  validate(s);
  const auto rates = shrink_rates(s);
  const auto radii = initial_radii(s);
  double T = radii[0] * radii[0] / (2.0 * rates[0]);
  for (std::size_t i = 1; i < radii.size(); ++i) T = std::min(T, radii[i] * radii[i] / (2.0 * rates[i]));
  return T;
}

/// Last time a trajectory may be sampled at.
inline double time_cutoff(double T) { return T - std::max(1e-9, 1e-6 * T); }

/// Curvature data at a point of the model with the given radii.
inline CurvatureData exact_state(const ExactSpec& s, const std::vector<double>& radii) {
  validate(s);
  if (radii.size() != initial_radii(s).size())
    throw Error(ErrorCode::BadSpec, "wrong number of radii for this model");
  for (double r : radii)
    if (!(r > 0.0)) throw Error(ErrorCode::BadSpec, "radii must be positive");
  CurvatureData data = zero_curvature(s.dims);
  const int n = s.dims.n;
  switch (s.kind) {
    case ExactKind::Sphere:
      for (int i = 0; i < n; ++i) data.set(i, i, 0, 1.0 / radii[0]);
      break;
    case ExactKind::Cylinder:
      for (int i = s.m; i < n; ++i) data.set(i, i, 0, 1.0 / radii[0]);
      break;
    case ExactKind::Product:
      // inward unit normals of the two factors are the first two normal directions
      for (int i = 0; i < s.p; ++i) data.set(i, i, 0, 1.0 / radii[0]);
      for (int i = s.p; i < n; ++i) data.set(i, i, 1, 1.0 / radii[1]);
      break;
  }
  data.H = trace_normal(data.dims, data.A);
  return data;
}

/// Closed-form radii at time t.
inline std::vector<double> exact_radii(const ExactSpec& s, double t) {
  const auto rates = shrink_rates(s);
  auto radii = initial_radii(s);
  for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = std::sqrt(radii[i] * radii[i] - 2.0 * rates[i] * t);
  return radii;
}

enum class ExactMethod { ClosedForm, RK4 };

struct FlowTrajectory {
  ExactSpec spec;
  std::vector<double> times;
  std::vector<std::vector<double>> radii;
  std::vector<CurvatureData> states;
  double T_sing = 0.0;
};

/// Samples the model at the requested (strictly increasing) times. With RK4 the
/// radius ODEs dr/dt = -rate/r are integrated with steps no larger than
/// min(dt, 1e-3 r_min^2), landing exactly on every requested time.
inline FlowTrajectory evolve_exact(const ExactSpec& s, const std::vector<double>& times,
                                   ExactMethod method = ExactMethod::ClosedForm, double dt = 1e-5) {
  validate(s);
  FlowTrajectory traj;
  traj.spec = s;
  traj.T_sing = singular_time(s);
  const double cutoff = time_cutoff(traj.T_sing);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw Error(ErrorCode::BadSpec, "times must be non-negative");
    if (times[i] > cutoff)
      throw Error(ErrorCode::TimeBeyondSingularity,
                  "t = " + csv::format(times[i]) + " is past the cutoff " + csv::format(cutoff));
    if (i > 0 && !(times[i] > times[i - 1])) throw Error(ErrorCode::BadSpec, "times must be strictly increasing");
  }
  if (method == ExactMethod::RK4 && !(dt > 0.0)) throw Error(ErrorCode::BadSpec, "dt must be positive");

  const auto rates = shrink_rates(s);
  auto radii = initial_radii(s);
  double t = 0.0;
  auto rhs = [&](const std::vector<double>& r) {
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = -rates[i] / r[i];
    return out;
  };
  auto axpy = [](const std::vector<double>& x, double h, const std::vector<double>& y) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * y[i];
    return out;
  };

  for (double target : times) {
    if (method == ExactMethod::ClosedForm) {
      radii = exact_radii(s, target);
    } else {
      while (t < target) {
        const double rmin = *std::min_element(radii.begin(), radii.end());
        double h = std::min(dt, 1e-3 * rmin * rmin);
        if (t + h >= target) h = target - t;
        const auto k1 = rhs(radii);
        const auto k2 = rhs(axpy(radii, h / 2, k1));
        const auto k3 = rhs(axpy(radii, h / 2, k2));
        const auto k4 = rhs(axpy(radii, h, k3));
        for (std::size_t i = 0; i < radii.size(); ++i) radii[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t = (t + h >= target) ? target : t + h;
      }
    }
    traj.times.push_back(target);
    traj.radii.push_back(radii);
    traj.states.push_back(exact_state(s, radii));
  }
  return traj;
}

/// Times approaching the singular time geometrically: T - t_i runs from T down
/// to roughly the cutoff distance in `count` equal ratios.
inline std::vector<double> geometric_times(double T, std::size_t count) {
  std::vector<double> times;
  const double last_gap = std::max(1e-9, 1e-6 * T) * 1.0000001;
  const double ratio = std::pow(last_gap / T, 1.0 / static_cast<double>(std::max<std::size_t>(count - 1, 1)));
  double gap = T;
  for (std::size_t i = 0; i < count; ++i) {
    times.push_back(T - gap);
    gap *= ratio;
  }
  return times;
}

struct DiagnosticRow {
  double t = 0.0;
  std::vector<double> radii;
  double Q = 0.0;
  double W = 0.0;
  double H2 = 0.0;
  double lambda1_over_H = 0.0;
  std::optional<double> f;
  std::optional<double> f_sigma;
  double codim_ratio = 0.0;
  double typeI_quantity = 0.0;  ///< (T - t) max |A|^2
};

struct FlowDiagnostics {
  std::vector<DiagnosticRow> rows;
  bool q_sign_preserved = true;           ///< Q(0) <= 0 implies Q(t) <= 1e-10 at every sample
  bool codim_ratio_nonincreasing = true;  ///< within 1e-10 relative per step
  bool w_lower_bound = true;              ///< W >= (eps0/2)|H|^2 wherever Q <= 0
};

inline bool nonincreasing(const std::vector<double>& series, double rel_tol = 1e-10) {
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i] > series[i - 1] + rel_tol * std::abs(series[i - 1])) return false;
  return true;
}

inline FlowDiagnostics flow_diagnostics(const FlowTrajectory& traj, const PinchingParams& params) {
  FlowDiagnostics out;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto rep = pinching_report(traj.states[i], params);
    DiagnosticRow row;
    row.t = traj.times[i];
    row.radii = traj.radii[i];
    row.Q = rep.Q;
    row.W = rep.W;
    row.H2 = rep.H1 * rep.H1;
    row.lambda1_over_H = rep.lambda.front() / rep.H1;
    row.f = rep.f;
    row.f_sigma = rep.f_sigma;
    row.codim_ratio = rep.codim_ratio;
    row.typeI_quantity = (traj.T_sing - row.t) * rep.normA2;
    out.rows.push_back(row);
    ratios.push_back(rep.codim_ratio);
    if (rep.Q <= 0.0 && rep.W < params.eps0 / 2.0 * row.H2 - 1e-10 * (1.0 + row.H2)) out.w_lower_bound = false;
  }
  if (!out.rows.empty() && out.rows.front().Q <= 0.0)
    for (const auto& row : out.rows)
      if (row.Q > 1e-10) out.q_sign_preserved = false;
  out.codim_ratio_nonincreasing = nonincreasing(ratios);
  return out;
}

/// Largest eta in (0, 1) for which |Ahat|^2 / |H|^{2-2 eta} is non-increasing
/// along the trajectory, by bisection. Returns 0 when no positive eta works.
inline double largest_monotone_eta(const FlowTrajectory& traj, int iterations = 50) {
  auto monotone = [&](double eta) {
    std::vector<double> ratios;
    for (const auto& state : traj.states) {
      const auto d = decompose(state);
      ratios.push_back(d.normAhat2 / std::pow(d.H1, 2.0 - 2.0 * eta));
    }
    return nonincreasing(ratios);
  };
  double lo = 0.0, hi = 1.0;
  if (monotone(hi)) return hi;
  if (!monotone(1e-12)) return 0.0;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (monotone(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline void write_csv(std::ostream& os, const ExactSpec& spec, const FlowDiagnostics& diag) {
  std::vector<std::string> header{"t"};
  for (const auto& name : radius_names(spec)) header.push_back(name);
  for (const char* name : {"Q", "W", "lambda1_over_H", "f", "f_sigma", "codim_ratio", "typeI_quantity"})
    header.emplace_back(name);
  csv::write_row(os, header);
  for (const auto& row : diag.rows) {
    std::vector<std::string> fields{csv::format(row.t)};
    for (double r : row.radii) fields.push_back(csv::format(r));
    for (double x : {row.Q, row.W, row.lambda1_over_H}) fields.push_back(csv::format(x));
    fields.push_back(csv::format(row.f));
    fields.push_back(csv::format(row.f_sigma));
    fields.push_back(csv::format(row.codim_ratio));
    fields.push_back(csv::format(row.typeI_quantity));
    csv::write_row(os, fields);
  }
}

}  // namespace pinchflow
