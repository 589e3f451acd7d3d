#include <gtest/gtest.h>

#include "pinchflow/parallel.hpp"
#include "pinchflow/sampling.hpp"
#include "support.hpp"

using namespace pinchflow;

TEST(PinchedSampler, AllOutputsPinchedWithPositiveH) {
  SampleSpec spec;
  spec.count = 100;
  spec.seed = 1;
  const auto samples = sample_pinched(spec);
  ASSERT_EQ(samples.size(), 100u);
  for (const auto& d : samples) {
    EXPECT_NO_THROW(validate(d));
    // independent re-check of Q <= 0 through the oracle contractions
    const auto T = support::to_tensor(d);
    const auto H = oracle::mean_curvature(T);
    const double H2 = H[0] * H[0] + H[1] * H[1];
    EXPECT_LE(oracle::norm2(T) - 0.25 * H2 + 0.1, 0.0);
    EXPECT_GT(H2, 0.0);
    EXPECT_TRUE(pinching_report(d, spec.params).pinched);
  }
}

TEST(PinchedSampler, CodimensionOneHasNoAhat) {
  SampleSpec spec;
  spec.dims = {5, 1};
  spec.count = 50;
  for (const auto& d : sample_pinched(spec)) EXPECT_LT(decompose(d).normAhat2, 1e-20 * decompose(d).normA2);
}

TEST(PinchedSampler, Deterministic) {
  SampleSpec spec;
  spec.count = 30;
  spec.seed = 12345;
  const auto a = sample_pinched(spec), b = sample_pinched(spec);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].A, b[i].A);
  spec.seed = 12346;
  EXPECT_NE(sample_pinched(spec)[0].A, a[0].A);
}

TEST(PinchedSampler, CoversBoundaryAndInterior) {
  SampleSpec spec;
  spec.count = 2000;
  int near = 0, inside = 0;
  for (const auto& d : sample_pinched(spec)) {
    const auto r = pinching_report(d, spec.params);
    const double rel = -r.Q / (r.H1 * r.H1);
    (rel < 1e-3 * (spec.params.c - 0.2) ? near : inside)++;
  }
  EXPECT_GT(near, 500);
  EXPECT_GT(inside, 500);
}

TEST(PinchedSampler, InfeasibleParams) {
  SampleSpec spec;
  spec.params.c = 0.2;
  try {
    sample_pinched_one(spec, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleParams);
  }
}

TEST(CodazziSampler, FullySymmetricAndDeterministic) {
  const auto a = sample_codazzi({5, 2}, 20, 7), b = sample_codazzi({5, 2}, 20, 7);
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_EQ(a[s].S, b[s].S);
    EXPECT_LE(codazzi_asymmetry(a[s]), 1e-14 * (1 + std::sqrt(norm2(a[s].S))));
  }
  for (const auto& g : sample_codazzi({5, 1}, 100, 7)) EXPECT_GE(gradient_pair(g).margin, 0.0);
}

TEST(RandomOrthogonal, IsOrthogonal) {
  auto rng = sample_engine(3, 4);
  const auto Q = random_orthogonal(rng, 6);
  EXPECT_LT((Q.transpose() * Q - Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-13);
}

TEST(ParallelFor, CoversRangeOnceForAnyWorkerCount) {
  for (unsigned workers : {1u, 2u, 3u, 7u, 64u}) {
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    }, workers);
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}

TEST(ParallelFor, SampleStreamIndependentOfWorkers) {
  SampleSpec spec;
  spec.count = 64;
  std::vector<double> one(spec.count), many(spec.count);
  parallel_for(spec.count, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) one[i] = norm2(sample_pinched_one(spec, i).A);
  }, 1);
  parallel_for(spec.count, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) many[i] = norm2(sample_pinched_one(spec, i).A);
  }, 5);
  EXPECT_EQ(one, many);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, [](std::size_t b, std::size_t) {
    if (b > 0) throw Error(ErrorCode::InvalidData, "boom");
  }, 4), Error);
}
