#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "oracles.hpp"
#include "pinchflow/geometry.hpp"

namespace support {

inline oracle::Tensor3 to_tensor(const pinchflow::CurvatureData& d) {
  auto t = oracle::zeros3(d.dims.n, d.dims.k);
  for (int i = 0; i < d.dims.n; ++i)
    for (int j = 0; j < d.dims.n; ++j)
      for (int a = 0; a < d.dims.k; ++a) t[i][j][a] = d(i, j, a);
  return t;
}

inline oracle::Matrix to_matrix(const Eigen::MatrixXd& m) {
  oracle::Matrix out = oracle::zeros(static_cast<int>(m.rows()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

/// Gaussian symmetric data from a plain std::mt19937 stream.
inline pinchflow::CurvatureData random_data(int n, int k, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  auto d = pinchflow::zero_curvature({n, k});
  for (int a = 0; a < k; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) d.set(i, j, a, scale * normal(rng));
  d.H = pinchflow::trace_normal(d.dims, d.A);
  return d;
}

inline pinchflow::CurvatureData sphere(int n, int k, double r) {
  auto d = pinchflow::zero_curvature({n, k});
  for (int i = 0; i < n; ++i) d.set(i, i, 0, 1.0 / r);
  d.H = pinchflow::trace_normal(d.dims, d.A);
  return d;
}

inline double rel(double x, double ref) { return std::abs(x - ref) / std::max(1.0, std::abs(ref)); }

}  // namespace support
