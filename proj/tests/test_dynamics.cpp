#include "hyperdrift/cocycle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hyperdrift/drift.hpp"
#include "hyperdrift/geometry.hpp"

namespace hd = hyperdrift;
namespace fg = hyperdrift::fg;

namespace {

fg::Word word(const char* text, int rank = 2) { return fg::parse_word(text, rank); }

hd::Cocycle<hd::CayleyTree> srw_cocycle(int rank = 2) {
  std::vector<fg::Word> steps;
  for (int g = 1; g <= rank; ++g) {
    fg::Word w;
    w.rank = rank;
    w.letters.push_back(static_cast<fg::Letter>(g));
    steps.push_back(w);
    w.letters.back() = static_cast<fg::Letter>(-g);
    steps.push_back(w);
  }
  std::vector<double> probs(steps.size(), 1.0 / static_cast<double>(steps.size()));
  return hd::make_iid_cocycle(hd::CayleyTree{rank}, std::move(steps), std::move(probs));
}

hd::Cocycle<hd::UpperHalfPlane> constant_plane_cocycle(hd::h2::Matrix g) {
  return hd::make_iid_cocycle(hd::UpperHalfPlane{}, {g}, {1.0});
}

hd::h2::Matrix diag_sqrt2() { return {std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2}; }

TEST(CocycleConstruction, ValidatesItsArguments) {
  EXPECT_THROW(hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a")}, {0.9}),
               std::invalid_argument);
  EXPECT_THROW(hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a")}, {0.5, 0.5}),
               std::invalid_argument);
  EXPECT_THROW(hd::make_iid_cocycle(hd::CayleyTree{2}, {}, {}), std::invalid_argument);

  auto kernel = hd::make_kernel({{0.0, 1.0}, {1.0, 0.0}});
  std::vector<fg::Word> table{word("1"), word("a"), word("b"), word("1")};
  EXPECT_NO_THROW(hd::make_markov_cocycle(hd::CayleyTree{2}, kernel, {1.0, 0.0}, table));
  EXPECT_THROW(hd::make_markov_cocycle(hd::CayleyTree{2}, kernel, {1.0}, table),
               std::invalid_argument);
  EXPECT_THROW(
      hd::make_markov_cocycle(hd::CayleyTree{2}, kernel, {1.0, 0.0}, {word("a"), word("b")}),
      std::invalid_argument);
}

TEST(SamplePath, ConstantDiagonalGrowsLinearly) {
  auto c = constant_plane_cocycle(diag_sqrt2());
  auto path = hd::sample_path(c, 10, 42);
  ASSERT_EQ(path.states.size(), 11u);
  ASSERT_EQ(path.displacement_log.size(), 11u);
  for (int i = 0; i <= 10; ++i) {
    EXPECT_NEAR(path.displacement_log[static_cast<std::size_t>(i)], i * std::numbers::ln2, 1e-9);
  }
}

TEST(SamplePath, IdentityCocycleStaysPut) {
  auto c = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("1")}, {1.0});
  auto path = hd::sample_path(c, 20, 9);
  for (double d : path.displacement_log) EXPECT_EQ(d, 0.0);
  EXPECT_THROW(hd::sample_path(c, 0, 9), std::invalid_argument);
}

TEST(SamplePath, IsDeterministicAndMatchesItsStateSequence) {
  auto kernel = hd::make_kernel({{0.3, 0.7}, {0.6, 0.4}});
  std::vector<fg::Word> table{word("a"), word("a b"), word("b-"), word("b a")};
  auto c = hd::make_markov_cocycle(hd::CayleyTree{2}, kernel, {0.5, 0.5}, table);

  auto p1 = hd::sample_path(c, 30, 77, 3);
  auto p2 = hd::sample_path(c, 30, 77, 3);
  EXPECT_EQ(p1.states, p2.states);
  EXPECT_EQ(p1.displacement_log, p2.displacement_log);

  // Rebuild the product from the recorded states; the tree makes it exact.
  fg::Word rebuilt = fg::Word::identity(2);
  for (std::size_t i = 0; i + 1 < p1.states.size(); ++i) {
    rebuilt = fg::mul(rebuilt, hd::step_isometry(c, p1.states[i], p1.states[i + 1]));
  }
  EXPECT_EQ(rebuilt.letters, p1.product.letters);
  EXPECT_EQ(p1.displacement_log.back(), static_cast<double>(rebuilt.length()));
}

TEST(SamplePath, DeterministicMarkovDriverFollowsTheKernel) {
  auto kernel = hd::make_kernel({{0.0, 1.0}, {1.0, 0.0}});
  std::vector<fg::Word> table{word("1"), word("a"), word("b"), word("1")};
  auto c = hd::make_markov_cocycle(hd::CayleyTree{2}, kernel, {1.0, 0.0}, table);
  auto path = hd::sample_path(c, 4, 5);
  EXPECT_EQ(path.states, (std::vector<int>{0, 1, 0, 1, 0}));
  // Steps alternate a (0 -> 1) and b (1 -> 0), so the product is abab.
  EXPECT_EQ(path.product.letters, word("a b a b").letters);
  EXPECT_EQ(path.displacement_log.back(), 4.0);
}

TEST(Drift, ConstantCocycleIsExactAtEveryHorizon) {
  auto c = constant_plane_cocycle(diag_sqrt2());
  for (int n : {1, 7, 40}) {
    auto est = hd::finite_scale_drift(c, n, 8, 11);
    EXPECT_NEAR(est.mean, std::numbers::ln2, 1e-9);
    EXPECT_NEAR(est.std_error, 0.0, 1e-12);
  }
}

TEST(Drift, ExhaustiveSrwValuesMatchTheLengthChain) {
  auto c = srw_cocycle();
  // All 16 two-step words: 4 cancel, 12 have length 2.
  EXPECT_DOUBLE_EQ(hd::finite_scale_drift_exact(c, 2), 0.75);

  // Independent oracle: |w_n| is a birth-death chain on the half line,
  // stepping +1 with probability 3/4 (1 from the origin) and -1 otherwise.
  for (int n : {1, 4, 8}) {
    std::vector<double> dist{1.0};
    for (int step = 0; step < n; ++step) {
      std::vector<double> next(dist.size() + 1, 0.0);
      next[1] += dist[0];
      for (std::size_t k = 1; k < dist.size(); ++k) {
        next[k + 1] += 0.75 * dist[k];
        next[k - 1] += 0.25 * dist[k];
      }
      dist = std::move(next);
    }
    double expected_length = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      expected_length += static_cast<double>(k) * dist[k];
    }
    EXPECT_NEAR(hd::finite_scale_drift_exact(c, n), expected_length / n, 1e-12) << "n=" << n;
  }

  EXPECT_THROW(hd::finite_scale_drift_exact(c, 30), std::invalid_argument);
}

TEST(Drift, MonteCarloAgreesWithExhaustiveWithinErrorBars) {
  auto c = srw_cocycle();
  double exact = hd::finite_scale_drift_exact(c, 8);
  auto est = hd::finite_scale_drift(c, 8, 20000, 31);
  EXPECT_GT(est.std_error, 0.0);
  EXPECT_NEAR(est.mean, exact, 4.0 * est.std_error);
}

TEST(Drift, SubadditiveAcrossCoupledHorizons) {
  auto c = srw_cocycle();
  auto e6 = hd::finite_scale_drift(c, 6, 4000, 17);
  auto e10 = hd::finite_scale_drift(c, 10, 4000, 17);
  auto e16 = hd::finite_scale_drift(c, 16, 4000, 17);
  double lhs = 16.0 * e16.mean;
  double rhs = 6.0 * e6.mean + 10.0 * e10.mean;
  double slack = 3.0 * (6.0 * e6.std_error + 10.0 * e10.std_error + 16.0 * e16.std_error);
  EXPECT_LE(lhs, rhs + slack);
}

TEST(Drift, ThreadCountDoesNotChangeTheEstimate) {
  auto c = srw_cocycle();
  auto serial = hd::finite_scale_drift(c, 12, 500, 23, 1);
  auto fourway = hd::finite_scale_drift(c, 12, 500, 23, 4);
  EXPECT_EQ(serial.mean, fourway.mean);
  EXPECT_EQ(serial.std_error, fourway.std_error);
}

TEST(DriftFit, ConstantCocycleFitsWithZeroSlope) {
  auto c = constant_plane_cocycle(diag_sqrt2());
  std::vector<int> grid{10, 20, 40, 80};
  auto fit = hd::drift_extrapolate(c, grid, 16, 3);
  EXPECT_FALSE(fit.degenerate);
  EXPECT_NEAR(fit.drift, std::numbers::ln2, 1e-9);
  EXPECT_NEAR(fit.slope, 0.0, 1e-9);
  EXPECT_NEAR(fit.residual, 0.0, 1e-12);
  ASSERT_EQ(fit.grid.size(), 4u);
  EXPECT_EQ(fit.grid[0].n, 10);
}

TEST(DriftFit, RejectsBadGrids) {
  auto c = srw_cocycle();
  std::vector<int> short_grid{10, 20};
  EXPECT_THROW(hd::drift_extrapolate(c, short_grid, 8, 3), std::invalid_argument);
  std::vector<int> unsorted{10, 10, 20};
  EXPECT_THROW(hd::drift_extrapolate(c, unsorted, 8, 3), std::invalid_argument);
}

TEST(Tails, ConstantCocycleNeverDeviates) {
  auto c = constant_plane_cocycle(diag_sqrt2());
  for (double eps : {0.01, 0.5, 2.0}) {
    auto tail = hd::ld_tail(c, std::numbers::e, 12, eps, 200, 7);
    EXPECT_EQ(tail.tail_count, 0);
    EXPECT_EQ(tail.tail_prob, 0.0);
    EXPECT_TRUE(std::isinf(tail.rate));
  }
}

TEST(Tails, CenterOverrideMakesEverySampleDeviate) {
  auto c = constant_plane_cocycle(diag_sqrt2());
  // Centered away from ln 2 by more than epsilon, all samples are tail.
  auto tail = hd::ld_tail(c, std::numbers::e, 12, 0.1, 200, 7, 1, 0.5);
  EXPECT_EQ(tail.tail_count, 200);
  EXPECT_EQ(tail.tail_prob, 1.0);
  EXPECT_EQ(tail.rate, 0.0);
  EXPECT_EQ(tail.center, 0.5);
}

TEST(Tails, SrwTailIsRareButPresent) {
  auto c = srw_cocycle();
  auto tail = hd::ld_tail(c, 2.0, 25, 0.2, 4000, 13);
  EXPECT_GT(tail.tail_count, 0);
  EXPECT_LT(tail.tail_prob, 0.5);
  EXPECT_GT(tail.rate, 0.0);
  EXPECT_TRUE(std::isfinite(tail.rate));
  EXPECT_THROW(hd::ld_tail(c, 2.0, 25, -0.1, 100, 13), std::invalid_argument);
  EXPECT_THROW(hd::ld_tail(c, 0.5, 25, 0.1, 100, 13), std::invalid_argument);
}

TEST(DinfCocycle, MatchesTableDisplacements) {
  auto ident = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("1")}, {1.0});
  EXPECT_DOUBLE_EQ(hd::dinf_cocycle(ident, 2.0), 1.0);

  auto c = constant_plane_cocycle(diag_sqrt2());
  EXPECT_NEAR(hd::dinf_cocycle(c, std::numbers::e), 2.0, 1e-12);

  EXPECT_DOUBLE_EQ(hd::dinf_cocycle(srw_cocycle(), 2.0), 2.0);
  EXPECT_THROW(hd::dinf_cocycle(c, 1.0), std::invalid_argument);
}

TEST(DinfDistance, ComparesTablesEntrywise) {
  auto ctx = hd::make_context(hd::CayleyTree{2}, 2.0);
  auto net = hd::bordification_net(ctx, 3);
  auto ca = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a")}, {1.0});
  auto cb = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("b")}, {1.0});

  EXPECT_DOUBLE_EQ(hd::dinf_distance(ctx, ca, ca, net), 0.0);
  double direct = hd::group_distance_lower<hd::CayleyTree>(ctx, word("a"), word("b"), net);
  EXPECT_DOUBLE_EQ(hd::dinf_distance(ctx, ca, cb, net), direct);
  EXPECT_DOUBLE_EQ(hd::dinf_distance(ctx, cb, ca, net), direct);

  EXPECT_THROW(hd::dinf_distance(ctx, ca, srw_cocycle(), net), std::invalid_argument);
}

TEST(SharedDriver, AcceptsMatchingRejectsMismatched) {
  auto ca = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a"), word("b")}, {0.5, 0.5});
  auto cb = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a b"), word("b-")}, {0.5, 0.5});
  EXPECT_NO_THROW(hd::check_shared_driver(ca, cb));

  auto skew = hd::make_iid_cocycle(hd::CayleyTree{2}, {word("a"), word("b")}, {0.25, 0.75});
  EXPECT_THROW(hd::check_shared_driver(ca, skew), std::invalid_argument);
}

}  // namespace
