#pragma once

// Pointwise algebra of the second fundamental form of an n-dimensional
// submanifold of R^{n+k}, always expressed in orthonormal tangent and normal
// frames.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinchflow/error.hpp"

namespace pinchflow {

struct Dims {
  int n = 2;  ///< intrinsic dimension
  int k = 1;  ///< codimension

  friend bool operator==(const Dims&, const Dims&) = default;
};

inline void validate(const Dims& dims) {
  if (dims.n < 2) throw Error(ErrorCode::InvalidData, "dimension n must be >= 2");
  if (dims.k < 1) throw Error(ErrorCode::InvalidData, "codimension k must be >= 1");
}

/// Second fundamental form A_{ij alpha} and mean curvature H_alpha at a point.
/// Storage of A is row-major in (i, j, alpha).
struct CurvatureData {
  Dims dims;
  std::vector<double> A;
  std::vector<double> H;

  std::size_t index(int i, int j, int alpha) const {
    return (static_cast<std::size_t>(i) * dims.n + j) * dims.k + alpha;
  }
  double operator()(int i, int j, int alpha) const { return A[index(i, j, alpha)]; }

  /// Writes both (i,j) and (j,i); H is not updated.
  void set(int i, int j, int alpha, double value) {
    A[index(i, j, alpha)] = value;
    A[index(j, i, alpha)] = value;
  }
};

/// H_alpha = sum_i A_{ii alpha}.
inline std::vector<double> trace_normal(const Dims& dims, const std::vector<double>& A) {
  std::vector<double> H(dims.k, 0.0);
  for (int i = 0; i < dims.n; ++i)
    for (int a = 0; a < dims.k; ++a)
      H[a] += A[(static_cast<std::size_t>(i) * dims.n + i) * dims.k + a];
  return H;
}

inline double norm2(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

/// Checks symmetry of A and consistency of the stored H with trace(A).
inline void validate(const CurvatureData& data) {
  validate(data.dims);
  const auto [n, k] = data.dims;
  const std::size_t size = static_cast<std::size_t>(n) * n * k;
  if (data.A.size() != size || data.H.size() != static_cast<std::size_t>(k))
    throw Error(ErrorCode::InvalidData, "array sizes do not match dims");
  const double scale = std::sqrt(norm2(data.A));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int a = 0; a < k; ++a)
        if (std::abs(data(i, j, a) - data(j, i, a)) > 1e-12 * (1.0 + scale))
          throw Error(ErrorCode::InvalidData, "A is not symmetric in its tangent slots");
  const auto trace = trace_normal(data.dims, data.A);
  for (int a = 0; a < k; ++a)
    if (std::abs(trace[a] - data.H[a]) > 1e-12 * (1.0 + scale))
      throw Error(ErrorCode::InvalidData, "stored H does not match trace(A)");
}

/// Builds curvature data from A alone, recomputing H.
inline CurvatureData make_curvature(Dims dims, std::vector<double> A) {
  CurvatureData data{dims, std::move(A), {}};
  data.H = trace_normal(dims, data.A);
  validate(data);
  return data;
}

inline CurvatureData zero_curvature(Dims dims) {
  validate(dims);
  return {dims, std::vector<double>(static_cast<std::size_t>(dims.n) * dims.n * dims.k, 0.0),
          std::vector<double>(dims.k, 0.0)};
}

/// Applies an orthogonal change of tangent frame (n x n) and of normal frame
/// (k x k): A'_{ij alpha} = Q_{ip} Q_{jq} R_{alpha beta} A_{pq beta}.
inline CurvatureData transform_frames(const CurvatureData& data, const Eigen::MatrixXd& tangent,
                                      const Eigen::MatrixXd& normal) {
  const auto [n, k] = data.dims;
  CurvatureData out = zero_curvature(data.dims);
  for (int a = 0; a < k; ++a) {
    Eigen::MatrixXd slice(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) slice(i, j) = data(i, j, a);
    const Eigen::MatrixXd rotated = tangent * slice * tangent.transpose();
    for (int b = 0; b < k; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.A[out.index(i, j, b)] += normal(b, a) * rotated(i, j);
  }
  out.H = trace_normal(out.dims, out.A);
  return out;
}

inline constexpr double kDefaultMeanCurvatureFloor = 1e-14;

/// A = h nu_1 + Ahat with nu_1 = H / |H|.
struct PrincipalDecomposition {
  Dims dims;
  std::vector<double> nu1;
  Eigen::MatrixXd h;
  std::vector<double> Ahat;  ///< same layout as CurvatureData::A
  double normA2 = 0.0;
  double normh2 = 0.0;
  double normAhat2 = 0.0;
  double H1 = 0.0;  ///< |H|

  double ahat(int i, int j, int alpha) const {
    return Ahat[(static_cast<std::size_t>(i) * dims.n + j) * dims.k + alpha];
  }
};

inline PrincipalDecomposition decompose(const CurvatureData& data,
                                        double floor = kDefaultMeanCurvatureFloor) {
  const auto [n, k] = data.dims;
  PrincipalDecomposition d;
  d.dims = data.dims;
  d.H1 = std::sqrt(norm2(data.H));
  if (!(d.H1 > floor))
    throw Error(ErrorCode::ZeroMeanCurvature, "|H| = " + std::to_string(d.H1) + " is below the floor");
  d.nu1.resize(k);
  for (int a = 0; a < k; ++a) d.nu1[a] = data.H[a] / d.H1;

  d.h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < k; ++a) d.h(i, j) += data(i, j, a) * d.nu1[a];

  d.Ahat.resize(data.A.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < k; ++a) {
        const std::size_t idx = data.index(i, j, a);
        d.Ahat[idx] = data.A[idx] - d.h(i, j) * d.nu1[a];
      }

  d.normA2 = norm2(data.A);
  d.normh2 = d.h.squaredNorm();
  d.normAhat2 = norm2(d.Ahat);
  return d;
}

/// Eigenvalues of a symmetric matrix in ascending order.
inline std::vector<double> eigenvalues(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  std::vector<double> values(solver.eigenvalues().data(),
                             solver.eigenvalues().data() + solver.eigenvalues().size());
  std::stable_sort(values.begin(), values.end());
  return values;
}

/// Constants of the pinching problem. `c` and `a` define the pinching cone
/// |A|^2 - c|H|^2 + a <= 0; the rest weight the convexity quantities.
struct PinchingParams {
  double c = 0.25;
  double a = 0.1;
  double eps0 = 1.0 / 60.0;
  double eps = 0.1;
  double Lambda = 1.0;
  double sigma = 0.1;
  double eta = 0.01;
  double Lmax = 1.0;
};

inline void validate(const PinchingParams& p, int n) {
  const double slack = 1e-12;
  if (!(p.c - 1.0 / n > 0.0))
    throw Error(ErrorCode::InvalidParams, "c must exceed 1/n");
  if (!(4.0 / (3.0 * n) - p.eps0 >= p.c - slack))
    throw Error(ErrorCode::InvalidParams, "c must satisfy c <= 4/(3n) - eps0");
  if (!(p.eps0 > 0.0)) throw Error(ErrorCode::InvalidParams, "eps0 must be positive");
  if (!(p.a > 0.0 && p.eps > 0.0 && p.Lambda > 0.0 && p.Lmax > 0.0))
    throw Error(ErrorCode::InvalidParams, "a, eps, Lambda and Lmax must be positive");
  if (!(p.sigma > 0.0 && p.sigma < 1.0)) throw Error(ErrorCode::InvalidParams, "sigma must lie in (0,1)");
  if (!(p.eta > 0.0 && p.eta < 1.0)) throw Error(ErrorCode::InvalidParams, "eta must lie in (0,1)");
}

struct PinchingReport {
  double Q = 0.0;
  double W = 0.0;
  std::optional<double> w;        ///< sqrt(W), absent when W <= 0
  double v = 0.0;                 ///< |Ahat|^2 / |H|
  std::vector<double> lambda;     ///< ascending eigenvalues of h
  std::optional<double> f;        ///< -lambda_1 - eps w + Lambda v, absent with w
  std::optional<double> f_sigma;  ///< f / |H|^{1-sigma}
  double codim_ratio = 0.0;       ///< |Ahat|^2 / |H|^{2-2 eta}
  bool pinched = false;           ///< Q <= 0
  double normA2 = 0.0;
  double H1 = 0.0;
  double normAhat2 = 0.0;
  double normh2 = 0.0;
};

inline PinchingReport pinching_report(const CurvatureData& data, const PinchingParams& params,
                                      double floor = kDefaultMeanCurvatureFloor) {
  validate(params, data.dims.n);
  const auto d = decompose(data, floor);
  const int n = data.dims.n;
  const double H2 = d.H1 * d.H1;

  PinchingReport r;
  r.normA2 = d.normA2;
  r.H1 = d.H1;
  r.normAhat2 = d.normAhat2;
  r.normh2 = d.normh2;
  r.Q = d.normA2 - params.c * H2 + params.a;
  r.pinched = r.Q <= 0.0;
  r.W = (4.0 / (3.0 * n) - params.eps0 / 2.0) * H2 - d.normA2;
  if (r.W > 0.0) r.w = std::sqrt(r.W);
  r.v = d.normAhat2 / d.H1;
  r.lambda = eigenvalues(d.h);
  if (r.w) {
    r.f = -r.lambda.front() - params.eps * *r.w + params.Lambda * r.v;
    r.f_sigma = *r.f / std::pow(d.H1, 1.0 - params.sigma);
  }
  r.codim_ratio = d.normAhat2 / std::pow(d.H1, 2.0 - 2.0 * params.eta);
  return r;
}

/// Upper end of the pinching range on which the surgery and convexity
/// results apply: 3(n+1)/(2n(n+2)) for n = 5,6,7 and 4/(3n) for n >= 8.
inline double critical_pinching(int n) {
  if (n < 5) throw Error(ErrorCode::DimensionTooSmall, "c_n is only defined for n >= 5");
  if (n <= 7) return 3.0 * (n + 1) / (2.0 * n * (n + 2));
  return 4.0 / (3.0 * n);
}

/// Coefficient delta_0 in the gradient term of the evolution of w = sqrt(W).
inline double delta0(int n, double eps0) {
  return std::sqrt(3.0 * n) / 2.0 * (n + 2) / 6.0 * eps0;
}

/// |grad A|^2 >= (3/(n+2)) |grad H|^2 for Codazzi tensors.
inline double gradient_coefficient(int n) { return 3.0 / (n + 2); }

/// Lambda = C / (2 eps delta_0). The dimensional constant C is never given
/// numerically; C = 1 is a surrogate.
inline double lambda_for(int n, double eps, double eps0, double C = 1.0) {
  return C / (2.0 * eps * delta0(n, eps0));
}

struct FlowConstants {
  double c_n = 0.0;
  double delta0 = 0.0;
  double grad_coeff = 0.0;
};

inline FlowConstants constants(int n, double eps0) {
  if (!(eps0 > 0.0)) throw Error(ErrorCode::InvalidParams, "eps0 must be positive");
  return {critical_pinching(n), delta0(n, eps0), gradient_coefficient(n)};
}

/// R^perp_{ij alpha beta} = sum_p A_{ip alpha} A_{jp beta} - A_{jp alpha} A_{ip beta}.
struct NormalCurvature {
  Dims dims;
  std::vector<double> Rperp;
  double norm2 = 0.0;

  double operator()(int i, int j, int alpha, int beta) const {
    return Rperp[((static_cast<std::size_t>(i) * dims.n + j) * dims.k + alpha) * dims.k + beta];
  }
};

inline NormalCurvature normal_curvature(const CurvatureData& data) {
  const auto [n, k] = data.dims;
  NormalCurvature out{data.dims, std::vector<double>(static_cast<std::size_t>(n) * n * k * k, 0.0), 0.0};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += data(i, p, a) * data(j, p, b) - data(j, p, a) * data(i, p, b);
          out.Rperp[((static_cast<std::size_t>(i) * n + j) * k + a) * k + b] = s;
          out.norm2 += s * s;
        }
  return out;
}

}  // namespace pinchflow
