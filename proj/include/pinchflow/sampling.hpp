#pragma once

// Seeded samplers for pinched curvature data, generic curvature data,
// symmetric matrices and Codazzi-symmetric gradient tensors.
//
// Every sample owns its own engine seeded from (seed, index), so sample i is
// the same no matter how the index range is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pinchflow/error.hpp"
#include "pinchflow/geometry.hpp"
#include "pinchflow/reaction.hpp"

namespace pinchflow {

struct SampleSpec {
  Dims dims{5, 2};
  PinchingParams params{};
  std::uint64_t count = 1000;
  std::uint64_t seed = 1;
  double scale_lo = 0.5;  ///< range of |H| before feasibility adjustment
  double scale_hi = 50.0;
};

inline void validate(const SampleSpec& spec) {
  validate(spec.dims);
  if (spec.count < 1) throw Error(ErrorCode::InvalidParams, "sample count must be >= 1");
  if (!(spec.scale_lo > 0.0 && spec.scale_hi >= spec.scale_lo))
    throw Error(ErrorCode::InvalidParams, "scale range must be positive and ordered");
}

/// Fixed constants of the pinched sampler, reported in verification headers.
struct SamplerConstants {
  static constexpr double kScaleGrowth = 1.01;      ///< |H| growth per adjustment step
  static constexpr int kMaxAdjustSteps = 1000;      ///< steps before a draw is rejected
  static constexpr int kMaxRedraws = 1000;          ///< rejected draws before giving up
  static constexpr double kBoundaryProbability = 0.5;  ///< chance of a near-boundary draw
  static constexpr double kBoundaryWidth = 1e-3;    ///< near-boundary budget fraction in (1-w, 1]
};

inline std::mt19937_64 sample_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

template <class Engine>
double log_uniform(Engine& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Haar-distributed orthogonal matrix.
template <class Engine>
Eigen::MatrixXd random_orthogonal(Engine& rng, int dim) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd R = qr.matrixQR();
  for (int j = 0; j < dim; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

/// Symmetric matrix with independent Gaussian entries (GOE-like).
template <class Engine>
Eigen::MatrixXd random_symmetric(Engine& rng, int dim) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd B(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) B(i, j) = B(j, i) = normal(rng);
  return B;
}

template <class Engine>
Eigen::MatrixXd random_traceless(Engine& rng, int dim) {
  Eigen::MatrixXd B = random_symmetric(rng, dim);
  B -= (B.trace() / dim) * Eigen::MatrixXd::Identity(dim, dim);
  return B;
}

/// Sample `index` of the pinched stream. Built in a normal frame whose first
/// vector is the mean curvature direction: h = s (h_o + I/n) and traceless
/// slices s*Ahat_beta for beta >= 2, with |h_o|^2 + |Ahat|^2 a fraction of the
/// pinching budget (c - 1/n) - a/s^2. The normal frame is then rotated at random.
inline CurvatureData sample_pinched_one(const SampleSpec& spec, std::uint64_t index) {
  const auto [n, k] = spec.dims;
  const double c = spec.params.c;
  const double a = spec.params.a;
  if (!(c - 1.0 / n > 0.0))
    throw Error(ErrorCode::InfeasibleParams, "pinched data requires c > 1/n");
  if (!(a > 0.0)) throw Error(ErrorCode::InfeasibleParams, "pinched data requires a > 0");

  auto rng = sample_engine(spec.seed, index);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  using C = SamplerConstants;

  double s = 0.0;
  double budget = 0.0;
  bool feasible = false;
  for (int draw = 0; draw < C::kMaxRedraws && !feasible; ++draw) {
    s = log_uniform(rng, spec.scale_lo, spec.scale_hi);
    for (int step = 0; step < C::kMaxAdjustSteps; ++step) {
      budget = (c - 1.0 / n) - a / (s * s);
      if (budget > 0.0) {
        feasible = true;
        break;
      }
      s *= C::kScaleGrowth;
    }
  }
  if (!feasible) throw Error(ErrorCode::InfeasibleParams, "no pinched data found in the |H| range");

  const double rho = uniform(rng) < C::kBoundaryProbability
                         ? 1.0 - C::kBoundaryWidth * uniform(rng)
                         : uniform(rng);
  // rho == 1 would sit on Q = 0 up to rounding; keep strictly inside
  const double X = std::min(rho, 1.0 - 1e-9) * budget;
  const double share = k > 1 ? uniform(rng) : 0.0;

  Eigen::MatrixXd hcirc = random_traceless(rng, n);
  if (hcirc.norm() > 0.0) hcirc *= std::sqrt((1.0 - share) * X) / hcirc.norm();
  std::vector<Eigen::MatrixXd> ahat;
  double ahat_norm2 = 0.0;
  for (int b = 1; b < k; ++b) {
    ahat.push_back(random_traceless(rng, n));
    ahat_norm2 += ahat.back().squaredNorm();
  }
  const double ahat_scale = ahat_norm2 > 0.0 ? std::sqrt(share * X / ahat_norm2) : 0.0;

  CurvatureData frame_data = zero_curvature(spec.dims);
  const Eigen::MatrixXd h = s * (hcirc + Eigen::MatrixXd::Identity(n, n) / n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      frame_data.A[frame_data.index(i, j, 0)] = h(i, j);
      for (int b = 1; b < k; ++b)
        frame_data.A[frame_data.index(i, j, b)] = s * ahat_scale * ahat[b - 1](i, j);
    }
  const Eigen::MatrixXd normal_rotation = random_orthogonal(rng, k);
  return transform_frames(frame_data, Eigen::MatrixXd::Identity(n, n), normal_rotation);
}

inline std::vector<CurvatureData> sample_pinched(const SampleSpec& spec) {
  validate(spec);
  std::vector<CurvatureData> out;
  out.reserve(spec.count);
  for (std::uint64_t i = 0; i < spec.count; ++i) out.push_back(sample_pinched_one(spec, i));
  return out;
}

/// Gaussian second fundamental form with log-uniform overall scale.
inline CurvatureData sample_generic_one(const SampleSpec& spec, std::uint64_t index) {
  auto rng = sample_engine(spec.seed, index);
  const double scale = log_uniform(rng, spec.scale_lo, spec.scale_hi);
  std::normal_distribution<double> normal;
  CurvatureData data = zero_curvature(spec.dims);
  for (int a = 0; a < spec.dims.k; ++a)
    for (int i = 0; i < spec.dims.n; ++i)
      for (int j = 0; j <= i; ++j) data.set(i, j, a, scale * normal(rng));
  data.H = trace_normal(data.dims, data.A);
  return data;
}

/// Gaussian array symmetrised over the six permutations of its tangent slots.
inline GradientTensor sample_codazzi_one(Dims dims, std::uint64_t seed, std::uint64_t index,
                                         double scale_lo = 0.5, double scale_hi = 50.0) {
  validate(dims);
  auto rng = sample_engine(seed, index);
  const double scale = log_uniform(rng, scale_lo, scale_hi);
  std::normal_distribution<double> normal;
  const int n = dims.n;
  GradientTensor raw{dims, std::vector<double>(static_cast<std::size_t>(n) * n * n * dims.k)};
  for (double& x : raw.S) x = normal(rng);
  GradientTensor out{dims, std::vector<double>(raw.S.size())};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p)
        for (int a = 0; a < dims.k; ++a)
          out.S[out.index(i, j, p, a)] =
              scale *
              (raw(i, j, p, a) + raw(i, p, j, a) + raw(j, i, p, a) + raw(j, p, i, a) + raw(p, i, j, a) +
               raw(p, j, i, a)) /
              6.0;
  return out;
}

inline std::vector<GradientTensor> sample_codazzi(Dims dims, std::uint64_t count, std::uint64_t seed) {
  std::vector<GradientTensor> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(sample_codazzi_one(dims, seed, i));
  return out;
}

}  // namespace pinchflow
