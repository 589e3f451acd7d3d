#pragma once

// Parametric mean curvature flow of doubly periodic surfaces (n = 2) in
// R^{2+k}, discretised on a uniform N x N grid over [0, 2pi)^2 with centred
// finite differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinchflow/csv.hpp"
#include "pinchflow/error.hpp"
#include "pinchflow/exact_flows.hpp"
#include "pinchflow/geometry.hpp"
#include "pinchflow/parallel.hpp"

namespace pinchflow {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Immersion sampled on the grid. F is stored point-major:
/// F[(iu * N + iv) * D + c] with D = 2 + k ambient components.
struct GridImmersion {
  int N = 0;
  int k = 2;
  double t = 0.0;
  std::vector<double> F;

  int ambient() const { return 2 + k; }
  std::size_t points() const { return static_cast<std::size_t>(N) * N; }
  std::size_t offset(int iu, int iv) const { return (static_cast<std::size_t>(iu) * N + iv) * ambient(); }
  double spacing() const { return kTwoPi / N; }
};

inline void validate(const GridImmersion& grid) {
  if (grid.N < 16 || grid.N % 2 != 0) throw Error(ErrorCode::BadResolution, "N must be even and >= 16");
  if (grid.k < 1) throw Error(ErrorCode::InvalidData, "codimension must be >= 1");
  if (grid.F.size() != grid.points() * grid.ambient()) throw Error(ErrorCode::InvalidData, "F has the wrong size");
  for (double x : grid.F)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidData, "F is not finite");
}

/// Product torus S^1(r1) x S^1(r2) in R^4, padded with zeros for k > 2.
inline GridImmersion build_torus(double r1, double r2, int N, int k) {
  if (N < 16 || N % 2 != 0) throw Error(ErrorCode::BadResolution, "N must be even and >= 16");
  if (!(r1 > 0.0 && r2 > 0.0)) throw Error(ErrorCode::BadSpec, "torus radii must be positive");
  if (k < 2) throw Error(ErrorCode::BadSpec, "the product torus needs codimension >= 2");
  GridImmersion grid{N, k, 0.0, std::vector<double>(static_cast<std::size_t>(N) * N * (2 + k), 0.0)};
  const double du = grid.spacing();
  for (int iu = 0; iu < N; ++iu)
    for (int iv = 0; iv < N; ++iv) {
      double* x = &grid.F[grid.offset(iu, iv)];
      x[0] = r1 * std::cos(iu * du);
      x[1] = r1 * std::sin(iu * du);
      x[2] = r2 * std::cos(iv * du);
      x[3] = r2 * std::sin(iv * du);
    }
  return grid;
}

/// Torus of revolution in R^3 (tube radius r around a circle of radius R),
/// padded with zeros for k > 1. u runs around the tube, v around the axis.
inline GridImmersion build_revolution_torus(double R, double r, int N, int k) {
  if (N < 16 || N % 2 != 0) throw Error(ErrorCode::BadResolution, "N must be even and >= 16");
  if (!(r > 0.0 && R > r)) throw Error(ErrorCode::BadSpec, "need R > r > 0");
  if (k < 1) throw Error(ErrorCode::BadSpec, "codimension must be >= 1");
  GridImmersion grid{N, k, 0.0, std::vector<double>(static_cast<std::size_t>(N) * N * (2 + k), 0.0)};
  const double du = grid.spacing();
  for (int iu = 0; iu < N; ++iu)
    for (int iv = 0; iv < N; ++iv) {
      double* x = &grid.F[grid.offset(iu, iv)];
      const double rho = R + r * std::cos(iu * du);
      x[0] = rho * std::cos(iv * du);
      x[1] = rho * std::sin(iv * du);
      x[2] = r * std::sin(iu * du);
    }
  return grid;
}

/// Centred periodic stencils of order 2, 4 or 6 (half-width = order / 2).
struct Stencil {
  int order = 6;
  std::vector<double> first;   ///< coefficients for offsets 1..half (antisymmetric)
  std::vector<double> second;  ///< coefficients for offsets 0..half (symmetric)
};

inline Stencil make_stencil(int order) {
  switch (order) {
    case 2: return {2, {0.5}, {-2.0, 1.0}};
    case 4: return {4, {2.0 / 3.0, -1.0 / 12.0}, {-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0}};
    case 6:
      return {6, {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0}, {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0}};
    default: throw Error(ErrorCode::BadSpec, "derivative order must be 2, 4 or 6");
  }
}

namespace detail {

/// d/du (axis 0) or d/dv (axis 1) of a periodic field with `width` components per point.
inline std::vector<double> diff1(const std::vector<double>& field, int N, int width, int axis, const Stencil& s,
                                 double h) {
  std::vector<double> out(field.size(), 0.0);
  const int half = static_cast<int>(s.first.size());
  for (int iu = 0; iu < N; ++iu)
    for (int iv = 0; iv < N; ++iv) {
      const std::size_t o = (static_cast<std::size_t>(iu) * N + iv) * width;
      for (int m = 1; m <= half; ++m) {
        const int pu = axis == 0 ? (iu + m) % N : iu, pv = axis == 1 ? (iv + m) % N : iv;
        const int qu = axis == 0 ? (iu - m + N) % N : iu, qv = axis == 1 ? (iv - m + N) % N : iv;
        const std::size_t op = (static_cast<std::size_t>(pu) * N + pv) * width;
        const std::size_t oq = (static_cast<std::size_t>(qu) * N + qv) * width;
        const double w = s.first[m - 1] / h;
        for (int c = 0; c < width; ++c) out[o + c] += w * (field[op + c] - field[oq + c]);
      }
    }
  return out;
}

inline std::vector<double> diff2(const std::vector<double>& field, int N, int width, int axis, const Stencil& s,
                                 double h) {
  std::vector<double> out(field.size(), 0.0);
  const int half = static_cast<int>(s.second.size()) - 1;
  const double h2 = h * h;
  for (int iu = 0; iu < N; ++iu)
    for (int iv = 0; iv < N; ++iv) {
      const std::size_t o = (static_cast<std::size_t>(iu) * N + iv) * width;
      for (int c = 0; c < width; ++c) out[o + c] = s.second[0] / h2 * field[o + c];
      for (int m = 1; m <= half; ++m) {
        const int pu = axis == 0 ? (iu + m) % N : iu, pv = axis == 1 ? (iv + m) % N : iv;
        const int qu = axis == 0 ? (iu - m + N) % N : iu, qv = axis == 1 ? (iv - m + N) % N : iv;
        const std::size_t op = (static_cast<std::size_t>(pu) * N + pv) * width;
        const std::size_t oq = (static_cast<std::size_t>(qu) * N + qv) * width;
        const double w = s.second[m] / h2;
        for (int c = 0; c < width; ++c) out[o + c] += w * (field[op + c] + field[oq + c]);
      }
    }
  return out;
}

inline double dot(const double* x, const double* y, int D) {
  double s = 0.0;
  for (int c = 0; c < D; ++c) s += x[c] * y[c];
  return s;
}

/// Symmetric inverse square root of a 2x2 SPD matrix [[a, b], [b, c]].
inline Eigen::Matrix2d inverse_sqrt(const Eigen::Matrix2d& g) {
  const double det = g.determinant();
  const double s = std::sqrt(det);
  const double t = std::sqrt(g.trace() + 2.0 * s);
  const Eigen::Matrix2d root = (g + s * Eigen::Matrix2d::Identity()) / t;
  return root.inverse();
}

}  // namespace detail

/// Coordinate derivatives of F: first (u, v) and second (uu, uv, vv).
struct GridDerivatives {
  std::vector<double> Fu, Fv, Fuu, Fuv, Fvv;
};

inline GridDerivatives derivatives(const GridImmersion& grid, int order) {
  const Stencil s = make_stencil(order);
  const double h = grid.spacing();
  const int D = grid.ambient();
  GridDerivatives d;
  d.Fu = detail::diff1(grid.F, grid.N, D, 0, s, h);
  d.Fv = detail::diff1(grid.F, grid.N, D, 1, s, h);
  d.Fuu = detail::diff2(grid.F, grid.N, D, 0, s, h);
  d.Fvv = detail::diff2(grid.F, grid.N, D, 1, s, h);
  d.Fuv = detail::diff1(d.Fv, grid.N, D, 0, s, h);
  return d;
}

struct PointGeometry {
  Eigen::Matrix2d g;
  Eigen::Matrix2d ginv;
  double area_element = 0.0;        ///< sqrt(det g)
  CurvatureData curv;               ///< orthonormal tangent and normal frames
  std::vector<double> H;            ///< ambient mean curvature vector
  std::vector<double> Xu, Xv;       ///< ambient tangent vectors
  std::array<std::vector<double>, 3> II;  ///< ambient II_uu, II_uv, II_vv
  std::array<std::array<double, 3>, 2> christoffel{};  ///< Gamma^f_{cd}, cd in (uu, uv, vv)
  double A2 = 0.0;
  double H2 = 0.0;
};

struct GridGeometry {
  int N = 0;
  int k = 0;
  int order = 6;
  std::vector<PointGeometry> points;
  double max_A2 = 0.0;
  double max_H2 = 0.0;
  double min_H2 = 0.0;
  double total_area = 0.0;
  double integral_H2 = 0.0;  ///< int |H|^2 dmu
};

/// Orthonormal basis of the normal space: Gram-Schmidt on the projected
/// ambient coordinate directions, largest remaining component first.
inline std::vector<std::vector<double>> normal_basis(const double* Xu, const double* Xv, const Eigen::Matrix2d& ginv,
                                                     int D, int k) {
  auto project = [&](std::vector<double> x) {
    const double pu = detail::dot(Xu, x.data(), D), pv = detail::dot(Xv, x.data(), D);
    const double cu = ginv(0, 0) * pu + ginv(0, 1) * pv;
    const double cv = ginv(1, 0) * pu + ginv(1, 1) * pv;
    for (int c = 0; c < D; ++c) x[c] -= cu * Xu[c] + cv * Xv[c];
    return x;
  };
  std::vector<std::vector<double>> basis;
  std::vector<bool> used(D, false);
  for (int col = 0; col < k; ++col) {
    int best = -1;
    double best_norm = -1.0;
    std::vector<double> best_vec;
    for (int a = 0; a < D; ++a) {
      if (used[a]) continue;
      std::vector<double> e(D, 0.0);
      e[a] = 1.0;
      auto v = project(e);
      for (const auto& b : basis) {
        const double proj = detail::dot(b.data(), v.data(), D);
        for (int c = 0; c < D; ++c) v[c] -= proj * b[c];
      }
      const double nv = std::sqrt(detail::dot(v.data(), v.data(), D));
      if (nv > best_norm) {
        best_norm = nv;
        best = a;
        best_vec = v;
      }
    }
    used[best] = true;
    for (double& x : best_vec) x /= best_norm;
    best_vec = project(best_vec);
    for (const auto& b : basis) {
      const double proj = detail::dot(b.data(), best_vec.data(), D);
      for (int c = 0; c < D; ++c) best_vec[c] -= proj * b[c];
    }
    const double nv = std::sqrt(detail::dot(best_vec.data(), best_vec.data(), D));
    for (double& x : best_vec) x /= nv;
    basis.push_back(best_vec);
  }
  return basis;
}

/// Metric, second fundamental form (normal part of the second derivatives)
/// and curvature data in orthonormalised frames at every grid point.
inline GridGeometry geometry(const GridImmersion& grid, int order = 6) {
  validate(grid);
  const int N = grid.N, D = grid.ambient(), k = grid.k;
  const auto d = derivatives(grid, order);
  const double du2 = grid.spacing() * grid.spacing();

  GridGeometry geo;
  geo.N = N;
  geo.k = k;
  geo.order = order;
  geo.points.resize(grid.points());

  double scale = 0.0;
  for (std::size_t i = 0; i < grid.points(); ++i) {
    const double* Xu = &d.Fu[i * D];
    const double* Xv = &d.Fv[i * D];
    scale = std::max(scale, detail::dot(Xu, Xu, D) * detail::dot(Xv, Xv, D));
  }

  parallel_for(grid.points(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* Xu = &d.Fu[i * D];
      const double* Xv = &d.Fv[i * D];
      PointGeometry& pg = geo.points[i];
      pg.g << detail::dot(Xu, Xu, D), detail::dot(Xu, Xv, D), detail::dot(Xu, Xv, D), detail::dot(Xv, Xv, D);
      const double det = pg.g.determinant();
      if (!(det > 1e-12 * scale))
        throw Error(ErrorCode::DegenerateMetric, "det g = " + csv::format(det) + " at point " + std::to_string(i));
      pg.ginv = pg.g.inverse();
      pg.area_element = std::sqrt(det);

      const std::array<const double*, 3> second{&d.Fuu[i * D], &d.Fuv[i * D], &d.Fvv[i * D]};
      for (int cd = 0; cd < 3; ++cd) {
        const double pu = detail::dot(Xu, second[cd], D), pv = detail::dot(Xv, second[cd], D);
        const double gu = pg.ginv(0, 0) * pu + pg.ginv(0, 1) * pv;
        const double gv = pg.ginv(1, 0) * pu + pg.ginv(1, 1) * pv;
        pg.christoffel[0][cd] = gu;
        pg.christoffel[1][cd] = gv;
        pg.II[cd].resize(D);
        for (int c = 0; c < D; ++c) pg.II[cd][c] = second[cd][c] - gu * Xu[c] - gv * Xv[c];
      }
      pg.Xu.assign(Xu, Xu + D);
      pg.Xv.assign(Xv, Xv + D);
      pg.H.assign(D, 0.0);
      for (int c = 0; c < D; ++c)
        pg.H[c] = pg.ginv(0, 0) * pg.II[0][c] + 2.0 * pg.ginv(0, 1) * pg.II[1][c] + pg.ginv(1, 1) * pg.II[2][c];

      // orthonormal tangent frame e_a = G_ab X_b with G = g^{-1/2}
      const Eigen::Matrix2d G = detail::inverse_sqrt(pg.g);
      const auto nu = normal_basis(Xu, Xv, pg.ginv, D, k);
      pg.curv = zero_curvature({2, k});
      auto II = [&](int c, int e) -> const std::vector<double>& { return pg.II[c + e]; };
      for (int a = 0; a < 2; ++a)
        for (int b = a; b < 2; ++b) {
          std::vector<double> Aab(D, 0.0);
          for (int c = 0; c < 2; ++c)
            for (int e = 0; e < 2; ++e) {
              const double w = G(a, c) * G(b, e);
              const auto& v = II(c, e);
              for (int x = 0; x < D; ++x) Aab[x] += w * v[x];
            }
          for (int al = 0; al < k; ++al) pg.curv.set(a, b, al, detail::dot(Aab.data(), nu[al].data(), D));
        }
      pg.curv.H = trace_normal(pg.curv.dims, pg.curv.A);
      pg.A2 = norm2(pg.curv.A);
      pg.H2 = norm2(pg.curv.H);
    }
  });

  geo.min_H2 = std::numeric_limits<double>::infinity();
  for (const auto& pg : geo.points) {
    geo.max_A2 = std::max(geo.max_A2, pg.A2);
    geo.max_H2 = std::max(geo.max_H2, pg.H2);
    geo.min_H2 = std::min(geo.min_H2, pg.H2);
    geo.total_area += pg.area_element * du2;
    geo.integral_H2 += pg.H2 * pg.area_element * du2;
  }
  return geo;
}


/// |grad A|^2 at every point, from the normal-bundle covariant derivative
///   (nabla_e II)_{cd} = P_perp d_e II_{cd} - Gamma^f_{ec} II_{fd} - Gamma^f_{ed} II_{cf}
/// contracted with the inverse metric. Works with ambient components, so no
/// choice of normal frame enters.
inline std::vector<double> gradient_A_norm2(const GridGeometry& geo) {
  const int N = geo.N;
  const std::size_t P = geo.points.size();
  const int D = 2 + geo.k;
  const Stencil s = make_stencil(geo.order);
  const double h = kTwoPi / N;
  std::vector<double> II(P * 3 * D);
  for (std::size_t i = 0; i < P; ++i)
    for (int cd = 0; cd < 3; ++cd)
      for (int c = 0; c < D; ++c) II[(i * 3 + cd) * D + c] = geo.points[i].II[cd][c];
  const std::array<std::vector<double>, 2> dII{detail::diff1(II, N, 3 * D, 0, s, h),
                                               detail::diff1(II, N, 3 * D, 1, s, h)};
  auto slot = [](int c, int d) { return c + d; };

  std::vector<double> out(P, 0.0);
  parallel_for(P, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& pg = geo.points[i];
      // cov[e][c][d] = (nabla_e II)_{cd}, ambient components
      std::array<std::array<std::array<std::vector<double>, 2>, 2>, 2> cov;
      for (int e = 0; e < 2; ++e)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) {
            std::vector<double> v(&dII[e][(i * 3 + slot(c, d)) * D], &dII[e][(i * 3 + slot(c, d)) * D] + D);
            const double pu = detail::dot(pg.Xu.data(), v.data(), D);
            const double pv = detail::dot(pg.Xv.data(), v.data(), D);
            const double cu = pg.ginv(0, 0) * pu + pg.ginv(0, 1) * pv;
            const double cv = pg.ginv(1, 0) * pu + pg.ginv(1, 1) * pv;
            for (int x = 0; x < D; ++x) v[x] -= cu * pg.Xu[x] + cv * pg.Xv[x];
            for (int f = 0; f < 2; ++f) {
              const double gec = pg.christoffel[f][slot(e, c)];
              const double ged = pg.christoffel[f][slot(e, d)];
              const auto& IIfd = pg.II[slot(f, d)];
              const auto& IIcf = pg.II[slot(c, f)];
              for (int x = 0; x < D; ++x) v[x] -= gec * IIfd[x] + ged * IIcf[x];
            }
            cov[e][c][d] = std::move(v);
          }
      const auto& G = pg.ginv;
      double total = 0.0;
      for (int e = 0; e < 2; ++e)
        for (int e2 = 0; e2 < 2; ++e2)
          for (int c = 0; c < 2; ++c)
            for (int c2 = 0; c2 < 2; ++c2)
              for (int d = 0; d < 2; ++d)
                for (int d2 = 0; d2 < 2; ++d2)
                  total += G(e, e2) * G(c, c2) * G(d, d2) *
                           detail::dot(cov[e][c][d].data(), cov[e2][c2][d2].data(), D);
      out[i] = total;
    }
  });
  return out;
}

/// |grad u|^2 = g^{ab} d_a u d_b u for a scalar field on the grid.
inline std::vector<double> scalar_gradient_norm2(const GridGeometry& geo, const std::vector<double>& u) {
  const Stencil s = make_stencil(geo.order);
  const double h = kTwoPi / geo.N;
  const auto du = detail::diff1(u, geo.N, 1, 0, s, h);
  const auto dv = detail::diff1(u, geo.N, 1, 1, s, h);
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& G = geo.points[i].ginv;
    out[i] = G(0, 0) * du[i] * du[i] + 2.0 * G(0, 1) * du[i] * dv[i] + G(1, 1) * dv[i] * dv[i];
  }
  return out;
}

/// Mean curvature velocity field and the global scalars needed while stepping.
struct FlowField {
  std::vector<double> H;   ///< ambient H per point, same layout as F
  std::vector<double> H2;  ///< |H|^2 per point
  double max_A2 = 0.0;
  double max_H2 = 0.0;
  double area = 0.0;
  double integral_H2 = 0.0;
};

inline FlowField flow_field(const GridImmersion& grid, int order = 6) {
  const int D = grid.ambient();
  const std::size_t P = grid.points();
  const auto d = derivatives(grid, order);
  const double du2 = grid.spacing() * grid.spacing();
  double scale = 0.0;
  for (std::size_t i = 0; i < P; ++i)
    scale = std::max(scale, detail::dot(&d.Fu[i * D], &d.Fu[i * D], D) * detail::dot(&d.Fv[i * D], &d.Fv[i * D], D));

  FlowField out;
  out.H.assign(P * D, 0.0);
  out.H2.assign(P, 0.0);
  std::vector<double> A2(P), sqrt_det(P);
  parallel_for(P, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* Xu = &d.Fu[i * D];
      const double* Xv = &d.Fv[i * D];
      Eigen::Matrix2d g;
      g << detail::dot(Xu, Xu, D), detail::dot(Xu, Xv, D), detail::dot(Xu, Xv, D), detail::dot(Xv, Xv, D);
      const double det = g.determinant();
      if (!(det > 1e-12 * scale))
        throw Error(ErrorCode::DegenerateMetric, "det g = " + csv::format(det) + " at point " + std::to_string(i));
      const Eigen::Matrix2d G = g.inverse();
      sqrt_det[i] = std::sqrt(det);
      std::array<std::vector<double>, 3> II;
      const std::array<const double*, 3> second{&d.Fuu[i * D], &d.Fuv[i * D], &d.Fvv[i * D]};
      for (int cd = 0; cd < 3; ++cd) {
        const double pu = detail::dot(Xu, second[cd], D), pv = detail::dot(Xv, second[cd], D);
        const double gu = G(0, 0) * pu + G(0, 1) * pv;
        const double gv = G(1, 0) * pu + G(1, 1) * pv;
        II[cd].resize(D);
        for (int c = 0; c < D; ++c) II[cd][c] = second[cd][c] - gu * Xu[c] - gv * Xv[c];
      }
      double* H = &out.H[i * D];
      for (int c = 0; c < D; ++c) H[c] = G(0, 0) * II[0][c] + 2.0 * G(0, 1) * II[1][c] + G(1, 1) * II[2][c];
      out.H2[i] = detail::dot(H, H, D);
      double a2 = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c)
            for (int e = 0; e < 2; ++e)
              a2 += G(a, c) * G(b, e) * detail::dot(II[a + b].data(), II[c + e].data(), D);
      A2[i] = a2;
    }
  });
  for (std::size_t i = 0; i < P; ++i) {
    out.max_A2 = std::max(out.max_A2, A2[i]);
    out.max_H2 = std::max(out.max_H2, out.H2[i]);
    out.area += sqrt_det[i] * du2;
    out.integral_H2 += out.H2[i] * sqrt_det[i] * du2;
  }
  return out;
}

/// Mean distance of the points from the origin in the coordinate plane (a, a+1).
inline double planar_radius(const GridImmersion& grid, int a) {
  const int D = grid.ambient();
  if (a < 0 || a + 1 >= D) throw Error(ErrorCode::InvalidParams, "plane outside the ambient space");
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.points(); ++i) sum += std::hypot(grid.F[i * D + a], grid.F[i * D + a + 1]);
  return sum / static_cast<double>(grid.points());
}

struct GridControls {
  double cfl = 0.1;
  double t_end = std::numeric_limits<double>::infinity();
  double stop_maxA2 = 1e6;
  int order = 6;
  double snapshot_every = 0.0;    ///< time cadence of snapshots; 0 disables
  double snapshot_growth = 2.0;   ///< also snapshot when max|A|^2 grows by this factor; 0 disables
  std::size_t max_steps = 10'000'000;
};

inline void validate(const GridControls& c) {
  if (!(c.cfl > 0.0)) throw Error(ErrorCode::InvalidParams, "cfl must be positive");
  if (!(c.t_end > 0.0)) throw Error(ErrorCode::InvalidParams, "t_end must be positive");
  if (!(c.stop_maxA2 > 0.0)) throw Error(ErrorCode::InvalidParams, "stop_maxA2 must be positive");
  if (!(c.snapshot_every >= 0.0)) throw Error(ErrorCode::InvalidParams, "snapshot cadence must be >= 0");
  if (!(c.snapshot_growth == 0.0 || c.snapshot_growth > 1.0))
    throw Error(ErrorCode::InvalidParams, "snapshot growth factor must be 0 or > 1");
  (void)make_stencil(c.order);
}

enum class StopReason { TimeReached, CurvatureThreshold, StepTooSmall, StepLimit };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::TimeReached: return "time_reached";
    case StopReason::CurvatureThreshold: return "curvature_threshold";
    case StopReason::StepTooSmall: return "step_too_small";
    case StopReason::StepLimit: return "step_limit";
  }
  return "unknown";
}

/// Scalars of the state at the start of each step (plus the final state).
struct StepRecord {
  double t = 0.0;
  double dt = 0.0;  ///< step taken from this state; 0 for the final state
  double max_A2 = 0.0;
  double max_H2 = 0.0;
  double area = 0.0;
  double integral_H2 = 0.0;
  std::vector<double> radii;  ///< planar radii for the planes (0,1), (2,3), ...
};

struct GridSnapshot {
  GridImmersion grid;
  std::vector<double> H2;  ///< |H|^2 per point
  double max_A2 = 0.0;
};

struct GridTrajectory {
  int order = 6;
  std::vector<StepRecord> records;
  std::vector<GridSnapshot> snapshots;  ///< initial, cadence and growth snapshots, final state
  StopReason stop = StopReason::TimeReached;
  GridImmersion final_state;
};

namespace detail {

inline StepRecord make_record(const GridImmersion& grid, const FlowField& field) {
  StepRecord r;
  r.t = grid.t;
  r.max_A2 = field.max_A2;
  r.max_H2 = field.max_H2;
  r.area = field.area;
  r.integral_H2 = field.integral_H2;
  for (int a = 0; a + 1 < grid.ambient(); a += 2) r.radii.push_back(planar_radius(grid, a));
  return r;
}

inline GridSnapshot make_snapshot(const GridImmersion& grid, const FlowField& field) {
  return {grid, field.H2, field.max_A2};
}

}  // namespace detail

/// Explicit RK4 for dF/dt = H with dt = cfl * du^2 / max(1, max|A|^2).
inline GridTrajectory evolve_grid(GridImmersion grid, const GridControls& controls = {}) {
  validate(grid);
  validate(controls);
  const double du = grid.spacing();
  const std::size_t size = grid.F.size();
  GridTrajectory traj;
  traj.order = controls.order;

  FlowField field = flow_field(grid, controls.order);
  traj.snapshots.push_back(detail::make_snapshot(grid, field));
  double next_cadence = controls.snapshot_every > 0.0 ? grid.t + controls.snapshot_every
                                                      : std::numeric_limits<double>::infinity();
  double last_snapshot_A2 = field.max_A2;
  bool last_is_snapshot = true;

  for (std::size_t step = 0;; ++step) {
    StepRecord record = detail::make_record(grid, field);
    if (field.max_A2 > controls.stop_maxA2) {
      traj.stop = StopReason::CurvatureThreshold;
      traj.records.push_back(record);
      break;
    }
    if (grid.t >= controls.t_end) {
      traj.stop = StopReason::TimeReached;
      traj.records.push_back(record);
      break;
    }
    if (step >= controls.max_steps) {
      traj.stop = StopReason::StepLimit;
      traj.records.push_back(record);
      break;
    }
    double dt = controls.cfl * du * du / std::max(1.0, field.max_A2);
    if (dt < 1e-12) {
      traj.stop = StopReason::StepTooSmall;
      traj.records.push_back(record);
      break;
    }
    bool at_cadence = false;
    if (grid.t + dt >= next_cadence) {
      dt = next_cadence - grid.t;
      at_cadence = true;
    }
    if (grid.t + dt >= controls.t_end) {
      dt = controls.t_end - grid.t;
      at_cadence = false;
    }
    record.dt = dt;
    traj.records.push_back(std::move(record));

    const GridImmersion start = grid;
    std::vector<double> acc(size, 0.0);
    const std::array<double, 4> weights{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    const std::array<double, 3> offsets{0.5, 0.5, 1.0};
    GridImmersion stage = start;
    FlowField k = field;
    for (int s = 0; s < 4; ++s) {
      if (s > 0) k = flow_field(stage, controls.order);
      for (std::size_t i = 0; i < size; ++i) acc[i] += weights[s] * k.H[i];
      if (s < 3)
        for (std::size_t i = 0; i < size; ++i) stage.F[i] = start.F[i] + offsets[s] * dt * k.H[i];
    }
    for (std::size_t i = 0; i < size; ++i) grid.F[i] = start.F[i] + dt * acc[i];
    grid.t = at_cadence ? next_cadence : start.t + dt;
    for (double x : grid.F)
      if (!std::isfinite(x)) throw Error(ErrorCode::DegenerateMetric, "immersion became non-finite");

    field = flow_field(grid, controls.order);
    last_is_snapshot = false;
    if (at_cadence) {
      next_cadence += controls.snapshot_every;
      traj.snapshots.push_back(detail::make_snapshot(grid, field));
      last_snapshot_A2 = field.max_A2;
      last_is_snapshot = true;
    } else if (controls.snapshot_growth > 0.0 && field.max_A2 >= controls.snapshot_growth * last_snapshot_A2) {
      traj.snapshots.push_back(detail::make_snapshot(grid, field));
      last_snapshot_A2 = field.max_A2;
      last_is_snapshot = true;
    }
  }
  if (!last_is_snapshot) traj.snapshots.push_back(detail::make_snapshot(grid, field));
  traj.final_state = std::move(grid);
  return traj;
}

struct IntegralDiagnostics {
  double Lp = 0.0;                 ///< int f_{sigma,k}^p dmu
  double supp_measure = 0.0;       ///< mu(supp f_{sigma,k})
  std::size_t undefined_points = 0;  ///< points where W <= 0, so f is not defined
  double poincare_lhs = 0.0;       ///< int |h|^2 u^2
  std::array<double, 3> poincare_rhs_terms{};  ///< int u^2|dA|^2/|A|^2, int u|du||dA|/|A|, int |A||Ahat|u^2
  std::optional<double> fitted_C;  ///< lhs / sum of rhs terms
  std::optional<double> max_f_sigma;
};

/// Truncated f_sigma integrals and the two sides of the Poincare-type
/// inequality with u = f_{sigma,k}^{p/2}.
inline IntegralDiagnostics integral_diagnostics(const GridGeometry& geo, const PinchingParams& params, double p,
                                                double k_level) {
  if (!(p > 0.0)) throw Error(ErrorCode::InvalidParams, "p must be positive");
  validate(params, 2);
  const std::size_t P = geo.points.size();
  const double du2 = (kTwoPi / geo.N) * (kTwoPi / geo.N);
  std::vector<PinchingReport> reports(P);
  parallel_for(P, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) reports[i] = pinching_report(geo.points[i].curv, params);
  });

  IntegralDiagnostics out;
  std::vector<double> u(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    const auto& r = reports[i];
    if (!r.f_sigma) {
      ++out.undefined_points;
      continue;
    }
    out.max_f_sigma = out.max_f_sigma ? std::max(*out.max_f_sigma, *r.f_sigma) : *r.f_sigma;
    const double fk = std::max(*r.f_sigma - k_level, 0.0);
    const double w = geo.points[i].area_element * du2;
    out.Lp += std::pow(fk, p) * w;
    if (fk > 0.0) out.supp_measure += w;
    u[i] = std::pow(fk, p / 2.0);
  }
  if (out.supp_measure == 0.0) return out;

  const auto gradA2 = gradient_A_norm2(geo);
  const auto gradu2 = scalar_gradient_norm2(geo, u);
  for (std::size_t i = 0; i < P; ++i) {
    if (u[i] == 0.0) continue;
    const double w = geo.points[i].area_element * du2;
    const auto& r = reports[i];
    const double A = std::sqrt(r.normA2);
    const double u2 = u[i] * u[i];
    out.poincare_lhs += r.normh2 * u2 * w;
    out.poincare_rhs_terms[0] += u2 * gradA2[i] / r.normA2 * w;
    out.poincare_rhs_terms[1] += u[i] * std::sqrt(gradu2[i]) * std::sqrt(gradA2[i]) / A * w;
    out.poincare_rhs_terms[2] += A * std::sqrt(r.normAhat2) * u2 * w;
  }
  const double rhs = out.poincare_rhs_terms[0] + out.poincare_rhs_terms[1] + out.poincare_rhs_terms[2];
  if (rhs > 0.0) out.fitted_C = out.poincare_lhs / rhs;
  return out;
}

/// Level-set functional A(k) = int_0^t mu(supp f_{sigma,k}) dt over the
/// snapshot times (trapezoidal rule), as a cumulative series.
inline std::vector<double> level_set_series(const GridTrajectory& traj, const PinchingParams& params,
                                            double k_level) {
  std::vector<double> out;
  double acc = 0.0, prev_t = 0.0, prev_m = 0.0;
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const auto& snap = traj.snapshots[s];
    const double m = integral_diagnostics(geometry(snap.grid, traj.order), params, 1.0, k_level).supp_measure;
    if (s > 0) acc += 0.5 * (m + prev_m) * (snap.grid.t - prev_t);
    out.push_back(acc);
    prev_t = snap.grid.t;
    prev_m = m;
  }
  return out;
}

struct RescaleSnapshot {
  std::size_t j = 0;
  double t_tilde = 0.0;
  double t_j = 0.0;
  std::size_t snapshot_index = 0;
  std::size_t point = 0;  ///< x_j as iu * N + iv
  double L = 0.0;         ///< |H|(x_j, t_j)
  std::vector<double> center;  ///< F(x_j, t_j)
  GridImmersion rescaled;      ///< L (F(., t_j) - center)
  double window_lo = 0.0;      ///< rescaled time of the trajectory start, -L^2 t_j
  double window_hi = 0.0;      ///< rescaled time of the last stored state, L^2 (t_last - t_j)
  double center_H = 0.0;       ///< |H| of the rescaled immersion at x_j
};

/// For each t~_j: (x_j, t_j) maximises (t~_j - t)|H|^2(x, t) over grid points
/// and stored snapshot times t <= t~_j. Near-ties (1e-10 relative) keep the
/// earliest time and then the lowest grid index.
inline std::vector<RescaleSnapshot> rescale_sequence(const GridTrajectory& traj, const std::vector<double>& schedule) {
  if (schedule.empty()) throw Error(ErrorCode::EmptySchedule, "rescale schedule is empty");
  if (traj.snapshots.empty()) throw Error(ErrorCode::InvalidData, "trajectory has no snapshots");
  const double t_last = traj.snapshots.back().grid.t;
  std::vector<RescaleSnapshot> out;
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    const double tt = schedule[j];
    if (!(tt >= traj.snapshots.front().grid.t) || tt > t_last)
      throw Error(ErrorCode::InvalidParams, "schedule time " + csv::format(tt) + " outside the trajectory");
    double best = -1.0;
    std::size_t best_s = 0, best_p = 0;
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
      const auto& snap = traj.snapshots[s];
      if (snap.grid.t > tt) break;
      for (std::size_t p = 0; p < snap.H2.size(); ++p) {
        const double value = (tt - snap.grid.t) * snap.H2[p];
        if (value > best + 1e-10 * std::abs(best)) {
          best = value;
          best_s = s;
          best_p = p;
        }
      }
    }
    const auto& snap = traj.snapshots[best_s];
    RescaleSnapshot r;
    r.j = j;
    r.t_tilde = tt;
    r.t_j = snap.grid.t;
    r.snapshot_index = best_s;
    r.point = best_p;
    r.L = std::sqrt(snap.H2[best_p]);
    if (!(r.L > 0.0)) throw Error(ErrorCode::ZeroMeanCurvature, "|H| vanishes at the selected point");
    const int D = snap.grid.ambient();
    r.center.assign(&snap.grid.F[best_p * D], &snap.grid.F[best_p * D] + D);
    r.rescaled = snap.grid;
    r.rescaled.t = 0.0;
    for (std::size_t i = 0; i < snap.grid.points(); ++i)
      for (int c = 0; c < D; ++c) r.rescaled.F[i * D + c] = r.L * (snap.grid.F[i * D + c] - r.center[c]);
    r.window_lo = 0.0 - r.L * r.L * r.t_j;
    r.window_hi = r.L * r.L * (t_last - r.t_j);
    r.center_H = std::sqrt(flow_field(r.rescaled, traj.order).H2[best_p]);
    out.push_back(std::move(r));
  }
  return out;
}

/// Time series of max|A|^2, the input to type classification.
struct CurvatureHistory {
  std::vector<double> t;
  std::vector<double> max_A2;
};

inline CurvatureHistory history(const GridTrajectory& traj) {
  CurvatureHistory h;
  for (const auto& r : traj.records) {
    h.t.push_back(r.t);
    h.max_A2.push_back(r.max_A2);
  }
  return h;
}

/// Homogeneous solutions: one point carries max|A|^2.
inline CurvatureHistory history(const FlowTrajectory& traj) {
  CurvatureHistory h;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    h.t.push_back(traj.times[i]);
    h.max_A2.push_back(norm2(traj.states[i].A));
  }
  return h;
}

enum class SingularityType { TypeI, TypeII, Inconclusive };

inline std::string to_string(SingularityType t) {
  switch (t) {
    case SingularityType::TypeI: return "typeI";
    case SingularityType::TypeII: return "typeII";
    case SingularityType::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct TypeClassification {
  double T_est = 0.0;
  std::vector<double> series;  ///< (T_est - t) max|A|^2 per sample
  SingularityType verdict = SingularityType::Inconclusive;
  std::optional<double> C;     ///< type I constant: max of the series over the final decade
  double drift = 0.0;          ///< (max - min) / mean over the final decade
  double growth = 0.0;         ///< last / first over the final decade (type II fallback: rate ratio)
  std::size_t window_begin = 0;
};

inline constexpr std::size_t kMinClassifySamples = 50;

/// T_est from a least-squares line through 1/max|A|^2 on the final 20% of
/// samples; the final decade is where T_est - t <= 10 (T_est - t_last).
inline TypeClassification classify_type(const CurvatureHistory& h) {
  const std::size_t n = h.t.size();
  if (n != h.max_A2.size()) throw Error(ErrorCode::InvalidData, "history columns differ in length");
  if (n < kMinClassifySamples)
    throw Error(ErrorCode::InsufficientData, std::to_string(n) + " samples, need " +
                                                 std::to_string(kMinClassifySamples));
  const std::size_t fit_begin = n - std::max<std::size_t>(2, n / 5);
  const double m = static_cast<double>(n - fit_begin);
  double t_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = fit_begin; i < n; ++i) {
    t_mean += h.t[i] / m;
    y_mean += 1.0 / h.max_A2[i] / m;
  }
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = fit_begin; i < n; ++i) {
    const double dt = h.t[i] - t_mean;
    stt += dt * dt;
    sty += dt * (1.0 / h.max_A2[i] - y_mean);
  }
  const double slope = sty / stt;

  TypeClassification out;
  if (!(slope < 0.0) || !std::isfinite(slope)) {
    out.T_est = std::numeric_limits<double>::infinity();
    out.series.assign(n, std::numeric_limits<double>::infinity());
    return out;
  }
  out.T_est = t_mean - y_mean / slope;
  for (std::size_t i = 0; i < n; ++i) out.series.push_back((out.T_est - h.t[i]) * h.max_A2[i]);

  const double gap_last = out.T_est - h.t.back();
  if (!(gap_last > 0.0)) {
    // 1/max|A|^2 bends toward zero faster than linearly: compare its local
    // decay rate at both ends of the fit window
    out.window_begin = fit_begin;
    auto rate = [&](std::size_t i) { return (1.0 / h.max_A2[i] - 1.0 / h.max_A2[i + 1]) / (h.t[i + 1] - h.t[i]); };
    bool increasing = true;
    for (std::size_t i = fit_begin + 1; i < n; ++i) increasing = increasing && h.max_A2[i] > h.max_A2[i - 1];
    const double last_rate = rate(n - 2);
    out.growth = last_rate > 0.0 ? rate(fit_begin) / last_rate : std::numeric_limits<double>::infinity();
    if (increasing && out.growth > 10.0) out.verdict = SingularityType::TypeII;
    return out;
  }
  std::size_t begin = n - 1;
  while (begin > 0 && out.T_est - h.t[begin - 1] <= 10.0 * gap_last) --begin;
  if (n - begin < 2) begin = fit_begin;
  out.window_begin = begin;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  bool monotone = true;
  for (std::size_t i = begin; i < n; ++i) {
    lo = std::min(lo, out.series[i]);
    hi = std::max(hi, out.series[i]);
    sum += out.series[i];
    if (i > begin && out.series[i] < out.series[i - 1]) monotone = false;
  }
  const double mean = sum / static_cast<double>(n - begin);
  out.drift = (hi - lo) / std::abs(mean);
  out.growth = out.series.back() / out.series[begin];
  if (std::isfinite(hi) && lo > 0.0 && out.drift < 0.1) {
    out.verdict = SingularityType::TypeI;
    out.C = hi;
  } else if (monotone && out.growth > 10.0) {
    out.verdict = SingularityType::TypeII;
  }
  return out;
}

/// Diagnostics CSV: one row per step record.
inline void write_diagnostics_csv(std::ostream& os, const GridTrajectory& traj) {
  std::vector<std::string> header{"t", "dt", "max_A2", "max_H2", "area", "integral_H2"};
  const std::size_t planes = traj.records.empty() ? 0 : traj.records.front().radii.size();
  for (std::size_t p = 0; p < planes; ++p) header.push_back("r" + std::to_string(p + 1));
  csv::write_row(os, header);
  for (const auto& r : traj.records) {
    std::vector<std::string> row{csv::format(r.t),    csv::format(r.dt),   csv::format(r.max_A2),
                                 csv::format(r.max_H2), csv::format(r.area), csv::format(r.integral_H2)};
    for (double x : r.radii) row.push_back(csv::format(x));
    csv::write_row(os, row);
  }
}

/// Snapshot CSV: a "# N=.. k=.. t=.." line, then one row per grid point.
inline void write_snapshot_csv(std::ostream& os, const GridImmersion& grid) {
  os << "# N=" << grid.N << " k=" << grid.k << " t=" << csv::format(grid.t) << '\n';
  std::vector<std::string> header{"iu", "iv"};
  for (int c = 0; c < grid.ambient(); ++c) header.push_back("x" + std::to_string(c + 1));
  csv::write_row(os, header);
  for (int iu = 0; iu < grid.N; ++iu)
    for (int iv = 0; iv < grid.N; ++iv) {
      std::vector<std::string> row{std::to_string(iu), std::to_string(iv)};
      const double* x = &grid.F[grid.offset(iu, iv)];
      for (int c = 0; c < grid.ambient(); ++c) row.push_back(csv::format(x[c]));
      csv::write_row(os, row);
    }
}

/// Reads back what write_snapshot_csv wrote.
inline GridImmersion read_snapshot_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# N=", 0) != 0)
    throw Error(ErrorCode::InvalidData, "missing snapshot header");
  GridImmersion grid;
  if (std::sscanf(line.c_str(), "# N=%d k=%d t=%lf", &grid.N, &grid.k, &grid.t) != 3)
    throw Error(ErrorCode::InvalidData, "malformed snapshot header");
  if (grid.N < 1 || grid.k < 1) throw Error(ErrorCode::InvalidData, "malformed snapshot header");
  std::getline(is, line);
  grid.F.assign(grid.points() * grid.ambient(), 0.0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      fields.push_back(std::stod(line.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    if (fields.size() != static_cast<std::size_t>(2 + grid.ambient()))
      throw Error(ErrorCode::InvalidData, "snapshot row has the wrong width");
    const int iu = static_cast<int>(fields[0]), iv = static_cast<int>(fields[1]);
    if (iu < 0 || iv < 0 || iu >= grid.N || iv >= grid.N) throw Error(ErrorCode::InvalidData, "index out of range");
    for (int c = 0; c < grid.ambient(); ++c) grid.F[grid.offset(iu, iv) + c] = fields[2 + c];
    ++rows;
  }
  if (rows != grid.points()) throw Error(ErrorCode::InvalidData, "snapshot has the wrong number of rows");
  return grid;
}

/// Rescaled point cloud: a comment line with the selection, then coordinates.
inline void write_rescale_csv(std::ostream& os, const RescaleSnapshot& r) {
  os << "# j=" << r.j << " t_tilde=" << csv::format(r.t_tilde) << " t_j=" << csv::format(r.t_j)
     << " point=" << r.point << " L=" << csv::format(r.L) << " window=" << csv::format(r.window_lo) << ':'
     << csv::format(r.window_hi) << " center_H=" << csv::format(r.center_H) << '\n';
  std::vector<std::string> header;
  for (int c = 0; c < r.rescaled.ambient(); ++c) header.push_back("x" + std::to_string(c + 1));
  csv::write_row(os, header);
  const int D = r.rescaled.ambient();
  for (std::size_t i = 0; i < r.rescaled.points(); ++i) {
    std::vector<std::string> row;
    for (int c = 0; c < D; ++c) row.push_back(csv::format(r.rescaled.F[i * D + c]));
    csv::write_row(os, row);
  }
}

}  // namespace pinchflow
