#pragma once

// Runs a named pointwise inequality or identity over a seeded sample stream
// and reports the worst normalised margin. A sample violates the property when
// its margin is below -tol.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pinchflow/error.hpp"
#include "pinchflow/geometry.hpp"
#include "pinchflow/parallel.hpp"
#include "pinchflow/reaction.hpp"
#include "pinchflow/sampling.hpp"

namespace pinchflow {

inline constexpr std::array<std::string_view, 8> kPropertyIds = {
    "poincare_identity", "gradient_ineq",   "pinch_reaction",   "simons_codim1_exact",
    "simons_lower_bound_fitC", "pythagoras", "frame_invariance", "coefficient_signs"};

/// Tolerance used when none is supplied.
inline double default_tolerance(std::string_view property_id) {
  if (property_id == "poincare_identity") return 1e-10;
  if (property_id == "gradient_ineq") return 1e-12;
  if (property_id == "pinch_reaction") return 1e-9;
  if (property_id == "simons_codim1_exact") return 1e-9;
  if (property_id == "simons_lower_bound_fitC") return 1e-12;
  if (property_id == "pythagoras") return 1e-12;
  if (property_id == "frame_invariance") return 1e-10;
  if (property_id == "coefficient_signs") return 0.0;
  throw Error(ErrorCode::UnknownProperty, std::string(property_id));
}

struct Violation {
  std::uint64_t offset = 0;  ///< sample index within the seeded stream
  double margin = 0.0;
};

struct VerificationReport {
  std::string property_id;
  SampleSpec spec;
  double tol = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t violation_count = 0;
  std::vector<Violation> violations;  ///< ascending by margin, at most kMaxListedViolations
  double worst_margin = std::numeric_limits<double>::infinity();
  std::uint64_t worst_offset = 0;
  std::optional<double> fitted_constant;
  double wall_time = 0.0;

  static constexpr std::size_t kMaxListedViolations = 1000;

  bool passed() const { return violation_count == 0; }
};

namespace detail {

inline double rel(double x, double y) { return std::abs(x - y) / (1.0 + std::abs(x)); }

/// Worst relative change of every frame-invariant report field under a random
/// rotation of both frames; returned as a non-positive margin.
inline double frame_invariance_margin(const SampleSpec& spec, std::uint64_t index) {
  const auto data = sample_pinched_one(spec, index);
  auto rng = sample_engine(spec.seed ^ 0x9e3779b97f4a7c15ULL, index);
  const auto tangent = random_orthogonal(rng, spec.dims.n);
  const auto normal = random_orthogonal(rng, spec.dims.k);
  const auto rotated = transform_frames(data, tangent, normal);
  const auto r1 = pinching_report(data, spec.params);
  const auto r2 = pinching_report(rotated, spec.params);
  double worst = std::max({rel(r1.normA2, r2.normA2), rel(r1.H1, r2.H1), rel(r1.normAhat2, r2.normAhat2),
                           rel(r1.Q, r2.Q), rel(r1.W, r2.W), rel(r1.v, r2.v),
                           rel(r1.codim_ratio, r2.codim_ratio)});
  for (std::size_t i = 0; i < r1.lambda.size(); ++i) worst = std::max(worst, rel(r1.lambda[i], r2.lambda[i]));
  if (r1.f.has_value() != r2.f.has_value()) return -1.0;
  if (r1.f) worst = std::max({worst, rel(*r1.f, *r2.f), rel(*r1.f_sigma, *r2.f_sigma)});
  return -worst;
}

inline double coefficient_margin(std::uint64_t index, std::uint64_t per_n) {
  const int n = 5 + static_cast<int>(index / per_n);
  const std::uint64_t j = index % per_n;
  const double lo = 1.0 / n + 1e-4;
  const double hi = 4.0 / (3.0 * n) - 1e-4;
  const double c = per_n > 1 ? lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(per_n - 1) : lo;
  const auto coeff = pinch_coefficients(n, c);
  return -std::max(coeff.mixed, coeff.quartic);
}

}  // namespace detail

/// Dimensions scanned by coefficient_signs.
inline constexpr int kCoefficientScanMinN = 5;
inline constexpr int kCoefficientScanMaxN = 12;

inline VerificationReport verify_property(std::string_view property_id, const SampleSpec& spec,
                                          std::optional<double> tol = std::nullopt) {
  const auto start = std::chrono::steady_clock::now();
  VerificationReport report;
  report.property_id = std::string(property_id);
  report.tol = tol.value_or(default_tolerance(property_id));
  report.spec = spec;
  validate(spec);

  const std::string id(property_id);
  std::uint64_t total = spec.count;
  if (id == "coefficient_signs") total = spec.count * (kCoefficientScanMaxN - kCoefficientScanMinN + 1);
  SampleSpec codim1 = spec;
  codim1.dims.k = 1;
  report.spec = id == "simons_codim1_exact" ? codim1 : spec;
  if (id == "pinch_reaction" || id == "frame_invariance") validate(spec.params, spec.dims.n);

  std::vector<double> margins(total, 0.0);
  // for the fitted-constant property: lower_bound - |E|^2 and |A|^5 |Ahat|
  std::vector<double> gap, weight, bound;
  if (id == "simons_lower_bound_fitC") {
    gap.assign(total, 0.0);
    weight.assign(total, 0.0);
    bound.assign(total, 0.0);
  }

  auto evaluate = [&](std::uint64_t i) -> double {
    if (id == "poincare_identity") {
      auto rng = sample_engine(spec.seed, i);
      const double scale = log_uniform(rng, spec.scale_lo, spec.scale_hi);
      const auto s = poincare_identity(scale * random_symmetric(rng, spec.dims.n));
      return -std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs));
    }
    if (id == "gradient_ineq") {
      const auto g = sample_codazzi_one(spec.dims, spec.seed, i, spec.scale_lo, spec.scale_hi);
      const auto pair = gradient_pair(g);
      return pair.normS2 > 0.0 ? pair.margin / pair.normS2 : 0.0;
    }
    if (id == "pinch_reaction") {
      const auto b = pinch_bound_rhs(sample_pinched_one(spec, i), spec.params);
      return b.margin / (1.0 + std::abs(b.lhs));
    }
    if (id == "simons_codim1_exact") {
      const auto e = simons_E(sample_generic_one(codim1, i));
      return -std::abs(e.normE2 - *e.lower_bound) / (1.0 + std::abs(*e.lower_bound));
    }
    if (id == "simons_lower_bound_fitC") {
      const auto data = sample_pinched_one(spec, i);
      const auto e = simons_E(data);
      const auto d = decompose(data);
      bound[i] = *e.lower_bound;
      gap[i] = *e.lower_bound - e.normE2;
      weight[i] = std::pow(d.normA2, 2.5) * std::sqrt(d.normAhat2);
      return 0.0;
    }
    if (id == "pythagoras") {
      const auto d = decompose(sample_generic_one(spec, i));
      return -std::abs(d.normA2 - d.normh2 - d.normAhat2) / (1.0 + d.normA2);
    }
    if (id == "frame_invariance") return detail::frame_invariance_margin(spec, i);
    if (id == "coefficient_signs") return detail::coefficient_margin(i, spec.count);
    throw Error(ErrorCode::UnknownProperty, id);
  };

  parallel_for(total, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) margins[i] = evaluate(i);
  });

  if (id == "simons_lower_bound_fitC") {
    // samples with Ahat = 0 carry no information about C
    double fitted = 0.0;
    for (std::uint64_t i = 0; i < total; ++i)
      if (weight[i] > 1e-300) fitted = std::max(fitted, gap[i] / weight[i]);
    report.fitted_constant = fitted;
    for (std::uint64_t i = 0; i < total; ++i) {
      margins[i] = (fitted * weight[i] - gap[i]) / (1.0 + std::abs(bound[i]));
    }
  }

  report.samples = total;
  for (std::uint64_t i = 0; i < total; ++i) {
    const double m = margins[i];
    if (m < report.worst_margin) {
      report.worst_margin = m;
      report.worst_offset = i;
    }
    if (m < -report.tol || std::isnan(m)) {
      ++report.violation_count;
      report.violations.push_back({i, m});
    }
  }
  std::stable_sort(report.violations.begin(), report.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.margin < b.margin; });
  if (report.violations.size() > VerificationReport::kMaxListedViolations)
    report.violations.resize(VerificationReport::kMaxListedViolations);

  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// One JSON record per report. wall_time is omitted when `with_timing` is false
/// so that identical runs serialise identically.
inline nlohmann::json to_json(const VerificationReport& r, bool with_timing = true) {
  nlohmann::json j;
  j["property_id"] = r.property_id;
  j["n"] = r.spec.dims.n;
  j["k"] = r.spec.dims.k;
  j["seed"] = r.spec.seed;
  j["tol"] = r.tol;
  j["samples"] = r.samples;
  j["worst_margin"] = r.worst_margin;
  j["worst_offset"] = r.worst_offset;
  j["fitted_constant"] = r.fitted_constant ? nlohmann::json(*r.fitted_constant) : nlohmann::json(nullptr);
  j["violation_count"] = r.violation_count;
  auto list = nlohmann::json::array();
  for (const auto& v : r.violations) list.push_back({{"offset", v.offset}, {"margin", v.margin}});
  j["violations"] = list;
  j["passed"] = r.passed();
  if (with_timing) j["wall_time"] = r.wall_time;
  return j;
}

/// Report document: a header with the sampler settings followed by the records.
inline nlohmann::json report_document(const std::vector<VerificationReport>& reports, bool with_timing = true) {
  using C = SamplerConstants;
  nlohmann::json doc;
  doc["format"] = "pinchflow-verification/1";
  nlohmann::json sampler;
  sampler["scale_growth"] = C::kScaleGrowth;
  sampler["max_adjust_steps"] = C::kMaxAdjustSteps;
  sampler["max_redraws"] = C::kMaxRedraws;
  sampler["boundary_probability"] = C::kBoundaryProbability;
  sampler["boundary_width"] = C::kBoundaryWidth;
  sampler["margin_normalisation"] = "margin / (1 + |lhs|)";
  if (!reports.empty()) {
    const auto& s = reports.front().spec;
    sampler["scale_range"] = {s.scale_lo, s.scale_hi};
    sampler["params"] = {{"c", s.params.c},         {"a", s.params.a},         {"eps0", s.params.eps0},
                         {"eps", s.params.eps},     {"Lambda", s.params.Lambda}, {"sigma", s.params.sigma},
                         {"eta", s.params.eta},     {"Lmax", s.params.Lmax}};
  }
  doc["sampler"] = sampler;
  auto records = nlohmann::json::array();
  for (const auto& r : reports) records.push_back(to_json(r, with_timing));
  doc["reports"] = records;
  return doc;
}

}  // namespace pinchflow
