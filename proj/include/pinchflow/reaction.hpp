#pragma once

// Zeroth-order reaction terms of the curvature evolution equations, the
// symmetrised Simons tensor and the gradient (Codazzi) inequality.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinchflow/error.hpp"
#include "pinchflow/geometry.hpp"

namespace pinchflow {

/// Reaction parts of (d/dt - Laplacian) applied to |A|^2 and |H|^2.
struct ReactionValues {
  double dA2 = 0.0;       ///< 2|<A,A>|^2 + 2|R^perp|^2
  double dH2 = 0.0;       ///< 2|<A,H>|^2
  double dQ_exact = 0.0;  ///< dA2 - c dH2
};

/// |<A,A>|^2 = sum_{ijpq} (sum_alpha A_{ij alpha} A_{pq alpha})^2.
inline double inner_AA_norm2(const CurvatureData& data) {
  const auto [n, k] = data.dims;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
      data.A.data(), static_cast<Eigen::Index>(n) * n, k);
  return (M * M.transpose()).squaredNorm();
}

/// |<A,H>|^2 = sum_{ij} (sum_alpha A_{ij alpha} H_alpha)^2.
inline double inner_AH_norm2(const CurvatureData& data) {
  const auto [n, k] = data.dims;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = 0.0;
      for (int a = 0; a < k; ++a) x += data(i, j, a) * data.H[a];
      s += x * x;
    }
  return s;
}

inline ReactionValues reaction_zeroth(const CurvatureData& data, double c) {
  ReactionValues r;
  r.dA2 = 2.0 * inner_AA_norm2(data) + 2.0 * normal_curvature(data).norm2;
  r.dH2 = 2.0 * inner_AH_norm2(data);
  r.dQ_exact = r.dA2 - c * r.dH2;
  return r;
}

/// Coefficients of the |h_o|^2 |Ahat|^2 and |Ahat|^4 terms of the pinching
/// bound: 6 - 2/(n(c-1/n)) and 3 - 2/(n(c-1/n)).
struct PinchCoefficients {
  double mixed = 0.0;
  double quartic = 0.0;
};

inline PinchCoefficients pinch_coefficients(int n, double c) {
  if (!(c - 1.0 / n > 0.0)) throw Error(ErrorCode::InvalidParams, "c must exceed 1/n");
  const double t = 2.0 / (n * (c - 1.0 / n));
  return {6.0 - t, 3.0 - t};
}

struct PinchBound {
  double rhs = 0.0;
  double lhs = 0.0;
  double margin = 0.0;  ///< rhs - lhs
};

/// Zeroth-order upper bound for the reaction terms of Q = |A|^2 - c|H|^2 + a,
/// valid where Q <= 0.
inline PinchBound pinch_bound_rhs(const CurvatureData& data, const PinchingParams& params) {
  const int n = data.dims.n;
  const double c = params.c;
  const double a = params.a;
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidParams, "a must be positive");
  const auto coeff = pinch_coefficients(n, c);
  const auto d = decompose(data);
  const double Q = d.normA2 - c * d.H1 * d.H1 + a;
  if (Q > 0.0) throw Error(ErrorCode::NotPinched, "Q = " + std::to_string(Q) + " > 0");

  const Eigen::MatrixXd traceless = d.h - (d.h.trace() / n) * Eigen::MatrixXd::Identity(n, n);
  const double hcirc2 = traceless.squaredNorm();
  const double K = 1.0 / (c - 1.0 / n);
  const double h2 = d.normh2;
  const double Ah2 = d.normAhat2;

  PinchBound out;
  out.rhs = 2.0 * h2 * Q - 2.0 * a * h2 - (2.0 * a / n) * K * Ah2 + (2.0 / n) * K * Ah2 * Q +
            coeff.mixed * hcirc2 * Ah2 + coeff.quartic * Ah2 * Ah2;
  out.lhs = reaction_zeroth(data, c).dQ_exact;
  out.margin = out.rhs - out.lhs;
  return out;
}

/// Orthonormal basis of R^k whose first column is nu1. The remaining columns
/// come from Gram-Schmidt on the coordinate directions, always taking the one
/// with the largest remaining component next.
inline Eigen::MatrixXd normal_frame(const std::vector<double>& nu1) {
  const int k = static_cast<int>(nu1.size());
  Eigen::MatrixXd frame = Eigen::MatrixXd::Zero(k, k);
  for (int a = 0; a < k; ++a) frame(a, 0) = nu1[a];
  std::vector<bool> used(k, false);
  for (int col = 1; col < k; ++col) {
    int best = -1;
    double best_norm = -1.0;
    Eigen::VectorXd best_vec;
    for (int a = 0; a < k; ++a) {
      if (used[a]) continue;
      Eigen::VectorXd v = Eigen::VectorXd::Unit(k, a);
      for (int c = 0; c < col; ++c) v -= frame.col(c).dot(v) * frame.col(c);
      const double nv = v.norm();
      if (nv > best_norm) {
        best_norm = nv;
        best = a;
        best_vec = v;
      }
    }
    used[best] = true;
    best_vec /= best_norm;
    // second pass keeps the basis orthonormal to rounding
    for (int c = 0; c < col; ++c) best_vec -= frame.col(c).dot(best_vec) * frame.col(c);
    frame.col(col) = best_vec.normalized();
  }
  return frame;
}

/// T_{ij} from the reaction terms of the evolution of h, summed over the
/// normal directions orthogonal to nu1.
inline Eigen::MatrixXd T_tensor(const PrincipalDecomposition& d) {
  const auto [n, k] = d.dims;
  if (!(d.H1 > 0.0) || d.nu1.size() != static_cast<std::size_t>(k))
    throw Error(ErrorCode::ZeroMeanCurvature, "normal frame is undefined without H");
  const Eigen::MatrixXd frame = normal_frame(d.nu1);
  const Eigen::MatrixXd& h = d.h;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int beta = 1; beta < k; ++beta) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < k; ++a) B(i, j) += d.ahat(i, j, a) * frame(a, beta);
    const double Bh = (B.array() * h.array()).sum();
    const Eigen::MatrixXd BBh = B * B * h;
    T += 2.0 * Bh * B + BBh + BBh.transpose() - 2.0 * B * h * B.transpose();
  }
  return T;
}

/// Symmetrised Simons tensor E_{klij alpha} with its split E = U + V.
/// Layout of E, U, V: (((k*n + l)*n + i)*n + j)*K + alpha.
struct SimonsTensors {
  Dims dims;
  std::vector<double> E;
  std::vector<double> U;
  std::vector<double> V;
  double normE2 = 0.0;
  double normU2 = 0.0;
  double normV2 = 0.0;
  std::optional<double> lower_bound;  ///< 8|h|^2 tr(h^4) - 8 tr(h^3)^2, needs H != 0
  std::optional<double> deficit;      ///< normE2 - lower_bound

  std::size_t index(int k, int l, int i, int j, int alpha) const {
    const std::size_t n = dims.n;
    return (((static_cast<std::size_t>(k) * n + l) * n + i) * n + j) * dims.k + alpha;
  }
};

/// 8|B|^2 tr(B^4) - 8 tr(B^3)^2.
inline double simons_lower_bound(const Eigen::MatrixXd& h) {
  const Eigen::MatrixXd h2 = h * h;
  const double tr3 = (h2 * h).trace();
  return 8.0 * h.squaredNorm() * h2.squaredNorm() - 8.0 * tr3 * tr3;
}

inline SimonsTensors simons_E(const CurvatureData& data) {
  const int n = data.dims.n;
  const int K = data.dims.k;
  const std::size_t nn = static_cast<std::size_t>(n);

  // M[i][beta][j][alpha] = sum_p A_{ip beta} A_{jp alpha}
  std::vector<double> M(nn * K * nn * K, 0.0);
  auto m_at = [&](int i, int b, int j, int a) -> double& {
    return M[((static_cast<std::size_t>(i) * K + b) * nn + j) * K + a];
  };
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < K; ++b)
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < K; ++a) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += data(i, p, b) * data(j, p, a);
          m_at(i, b, j, a) = s;
        }
  // term(x,y; z,w)_alpha = sum_beta A_{xy beta} M[z][beta][w][alpha]
  auto term = [&](int x, int y, int z, int w, int a) {
    double s = 0.0;
    for (int b = 0; b < K; ++b) s += data(x, y, b) * m_at(z, b, w, a);
    return s;
  };
  const auto normal = normal_curvature(data);
  // sum_beta A_{xy beta} R_{zw alpha beta}
  auto rterm = [&](int x, int y, int z, int w, int a) {
    double s = 0.0;
    for (int b = 0; b < K; ++b) s += data(x, y, b) * normal(z, w, a, b);
    return s;
  };

  SimonsTensors out;
  out.dims = data.dims;
  const std::size_t size = nn * nn * nn * nn * K;
  out.E.assign(size, 0.0);
  out.U.assign(size, 0.0);
  out.V.assign(size, 0.0);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < K; ++a) {
            const double e = term(k, l, i, j, a) + term(l, k, j, i, a) - term(i, j, k, l, a) -
                             term(j, i, l, k, a) + term(j, l, i, k, a) + term(i, k, j, l, a) +
                             term(j, k, i, l, a) + term(i, l, j, k, a) - term(i, l, k, j, a) -
                             term(j, k, l, i, a) - term(j, l, k, i, a) - term(i, k, l, j, a);
            const double u = 2.0 * term(k, l, i, j, a) - 2.0 * term(i, j, k, l, a);
            const double v = rterm(k, l, i, j, a) - rterm(i, j, k, l, a) + rterm(j, l, k, i, a) +
                             rterm(j, k, l, i, a) + rterm(i, k, l, j, a) + rterm(i, l, k, j, a);
            const std::size_t idx = out.index(k, l, i, j, a);
            out.E[idx] = e;
            out.U[idx] = u;
            out.V[idx] = v;
          }
  out.normE2 = norm2(out.E);
  out.normU2 = norm2(out.U);
  out.normV2 = norm2(out.V);
  if (std::sqrt(norm2(data.H)) > kDefaultMeanCurvatureFloor) {
    out.lower_bound = simons_lower_bound(decompose(data).h);
    out.deficit = out.normE2 - *out.lower_bound;
  }
  return out;
}

struct PoincareSides {
  double lhs = 0.0;  ///< |B|^2 tr(B^4) - tr(B^3)^2
  double rhs = 0.0;  ///< (1/2) sum_{ij} mu_i^2 mu_j^2 (mu_i - mu_j)^2
};

inline PoincareSides poincare_identity(const Eigen::MatrixXd& B) {
  PoincareSides s;
  // |B|^2 |B^2|^2 - <B, B^2>^2 as a Lagrange sum of squares over entries
  const Eigen::MatrixXd B2 = B * B;
  const Eigen::Index size = B.size();
  const double* x = B.data();
  const double* y = B2.data();
  double lhs = 0.0;
  for (Eigen::Index p = 0; p < size; ++p)
    for (Eigen::Index q = p + 1; q < size; ++q) {
      const double w = x[p] * y[q] - x[q] * y[p];
      lhs += w * w;
    }
  s.lhs = lhs;
  const auto mu = eigenvalues(B);
  double sum = 0.0;
  for (double x : mu)
    for (double y : mu) sum += x * x * y * y * (x - y) * (x - y);
  s.rhs = 0.5 * sum;
  return s;
}

/// Covariant derivative of A at a point, S_{ijp alpha} = nabla_p A_{ij alpha}.
/// Codazzi symmetry makes it fully symmetric in (i, j, p).
struct GradientTensor {
  Dims dims;
  std::vector<double> S;

  std::size_t index(int i, int j, int p, int alpha) const {
    const std::size_t n = dims.n;
    return ((static_cast<std::size_t>(i) * n + j) * n + p) * dims.k + alpha;
  }
  double operator()(int i, int j, int p, int alpha) const { return S[index(i, j, p, alpha)]; }

  /// dH_{p alpha} = sum_i S_{iip alpha}, row-major (p, alpha)
  std::vector<double> dH() const {
    std::vector<double> out(static_cast<std::size_t>(dims.n) * dims.k, 0.0);
    for (int p = 0; p < dims.n; ++p)
      for (int a = 0; a < dims.k; ++a)
        for (int i = 0; i < dims.n; ++i) out[p * dims.k + a] += (*this)(i, i, p, a);
    return out;
  }
};

/// Largest deviation from full symmetry in the tangent slots.
inline double codazzi_asymmetry(const GradientTensor& g) {
  const int n = g.dims.n;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p)
        for (int a = 0; a < g.dims.k; ++a) {
          const double s = g(i, j, p, a);
          worst = std::max({worst, std::abs(s - g(j, i, p, a)), std::abs(s - g(i, p, j, a)),
                            std::abs(s - g(p, j, i, a))});
        }
  return worst;
}

struct GradientPair {
  double normS2 = 0.0;   ///< |grad A|^2
  double normdH2 = 0.0;  ///< |grad H|^2
  double margin = 0.0;   ///< normS2 - 3/(n+2) normdH2
};

inline GradientPair gradient_pair(const GradientTensor& g) {
  validate(g.dims);
  const std::size_t size = static_cast<std::size_t>(g.dims.n) * g.dims.n * g.dims.n * g.dims.k;
  if (g.S.size() != size) throw Error(ErrorCode::InvalidData, "gradient tensor size mismatch");
  GradientPair out;
  out.normS2 = norm2(g.S);
  if (codazzi_asymmetry(g) > 1e-12 * (1.0 + std::sqrt(out.normS2)))
    throw Error(ErrorCode::NotCodazzi, "gradient tensor is not symmetric in its tangent slots");
  out.normdH2 = norm2(g.dH());
  out.margin = out.normS2 - gradient_coefficient(g.dims.n) * out.normdH2;
  return out;
}

}  // namespace pinchflow
