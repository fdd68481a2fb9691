#include "hyperdrift/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "hyperdrift/rng.hpp"
#include "test_support.hpp"

namespace hd = hyperdrift;
namespace fg = hyperdrift::fg;

namespace {

hd::GeometryContext<hd::CayleyTree> tree_ctx(int rank = 2, double b = 2.0) {
  return hd::make_context(hd::CayleyTree{rank}, b);
}

hd::GeometryContext<hd::UpperHalfPlane> plane_ctx() {
  return hd::make_context(hd::UpperHalfPlane{});
}

fg::Word word(const char* text, int rank = 2) { return fg::parse_word(text, rank); }

hd::ExtPoint<hd::CayleyTree> tw(const char* text, int rank = 2) {
  return hd::interior<hd::CayleyTree>(word(text, rank));
}

hd::ExtPoint<hd::CayleyTree> te(const char* prefix, const char* period, int rank = 2) {
  return hd::at_boundary<hd::CayleyTree>(fg::make_end(word(prefix, rank), word(period, rank)));
}

hd::ExtPoint<hd::UpperHalfPlane> hp(double re, double im) {
  return hd::interior<hd::UpperHalfPlane>(hd::h2::Point{re, im});
}

hd::ExtPoint<hd::UpperHalfPlane> hb(double xi) {
  return hd::at_boundary<hd::UpperHalfPlane>(hd::h2::Boundary::at(xi));
}

hd::ExtPoint<hd::UpperHalfPlane> hinf() {
  return hd::at_boundary<hd::UpperHalfPlane>(hd::h2::Boundary::infinity());
}

TEST(GaugeFromExponent, ClampsAndInverts) {
  EXPECT_DOUBLE_EQ(hd::gauge_from_exponent(0.0), 1.0);
  EXPECT_DOUBLE_EQ(hd::gauge_from_exponent(std::numbers::ln2), 0.5);
  EXPECT_EQ(hd::gauge_from_exponent(700.0), 0.0);
  EXPECT_EQ(hd::gauge_from_exponent(std::numeric_limits<double>::infinity()), 0.0);
}

TEST(GromovProduct, TreeInteriorPairs) {
  auto ctx = tree_ctx();
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a b"), tw("a b-")), 1.0);
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a"), tw("b")), 0.0);
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a b a"), tw("a b a")), 3.0);
  // Seen from a, the same two points branch immediately.
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a b"), tw("a b-"), word("a")), 0.0);
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("b"), tw("b a"), word("a")), 2.0);
}

TEST(GromovProduct, TreeBoundaryPairs) {
  auto ctx = tree_ctx();
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, te("a", "a"), te("a b", "a b")), 1.0);
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, te("a", "a"), te("b", "b")), 0.0);
  EXPECT_TRUE(std::isinf(hd::gromov_product(ctx, te("a", "a"), te("a a", "a"))));
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a a a"), te("a", "a")), 3.0);
  EXPECT_DOUBLE_EQ(hd::gromov_product(ctx, tw("a a a"), te("a", "a"), word("a")), 2.0);
}

TEST(GromovProduct, PlaneClosedForms) {
  auto ctx = plane_ctx();
  EXPECT_NEAR(hd::gromov_product(ctx, hp(0, 2), hp(0, 2)), std::log(2.0), 1e-15);
  EXPECT_NEAR(hd::gromov_product(ctx, hb(1.0), hb(-1.0)), std::log(2.0 / 2.0), 1e-15);
  EXPECT_NEAR(hd::gromov_product(ctx, hb(1.0), hinf()), 0.5 * std::log(2.0), 1e-15);
  // <z, eta> agrees with the interior formula pushed to the boundary:
  // approaching infinity along the axis from 4i keeps the product at ln 4.
  double direct = hd::gromov_product(ctx, hp(0, 4), hinf());
  EXPECT_NEAR(direct, std::log(4.0), 1e-12);
}

TEST(FourPoint, HoldsOnRandomQuadruples) {
  auto tctx = tree_ctx();
  hd::CounterRng rng(2026, 11);
  for (int trial = 0; trial < 2000; ++trial) {
    auto x = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(9)) + 1);
    auto y = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(9)) + 1);
    auto z = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(9)) + 1);
    auto w = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(9)) + 1);
    EXPECT_GE(hd::four_point_slack(tctx, x, y, z, w), 0.0);
  }
  auto pctx = plane_ctx();
  for (int trial = 0; trial < 2000; ++trial) {
    auto x = testsupport::random_point(rng);
    auto y = testsupport::random_point(rng);
    auto z = testsupport::random_point(rng);
    auto w = testsupport::random_point(rng);
    EXPECT_GE(hd::four_point_slack(pctx, x, y, z, w), -1e-9);
  }
}

TEST(VisualGauge, TreeFrozenValues) {
  auto ctx = tree_ctx();
  EXPECT_DOUBLE_EQ(hd::visual_gauge(ctx, te("a", "a"), te("b", "b")), 1.0);
  EXPECT_DOUBLE_EQ(hd::visual_gauge(ctx, te("a", "a"), te("a b", "a b")), 0.5);
  EXPECT_DOUBLE_EQ(hd::visual_gauge(ctx, te("a", "a"), te("a a a", "a")), 0.0);
  // Base 4 squares the gauge relative to base 2.
  auto wide = tree_ctx(2, 4.0);
  EXPECT_DOUBLE_EQ(hd::visual_gauge(wide, te("a", "a"), te("a b", "a b")), 0.25);
}

TEST(VisualMetric, PicksTheSmallerBranch) {
  auto ctx = tree_ctx();
  // Nearby interior points: the length branch wins (ln 2 < 1).
  EXPECT_DOUBLE_EQ(hd::visual_metric(ctx, tw("1"), tw("a")), std::numbers::ln2);
  // Far apart interior points: the gauge branch caps the value at 1.
  EXPECT_DOUBLE_EQ(hd::visual_metric(ctx, tw("a a a a a"), tw("b b b b b")), 1.0);
  EXPECT_DOUBLE_EQ(hd::visual_metric(ctx, te("a", "a"), te("a a", "a")), 0.0);
  EXPECT_DOUBLE_EQ(hd::visual_metric(ctx, tw("a a"), te("a", "a")), 0.25);
}

TEST(VisualMetric, NeverExceedsOne) {
  auto tctx = tree_ctx();
  hd::CounterRng rng(2026, 12);
  for (int trial = 0; trial < 500; ++trial) {
    auto x = hd::interior<hd::CayleyTree>(
        testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(8)) + 1));
    auto e = hd::at_boundary<hd::CayleyTree>(testsupport::random_end(rng, 2, 4));
    EXPECT_LE(hd::visual_metric(tctx, x, e), 1.0);
    EXPECT_LE(hd::visual_metric(tctx, x, x), 1.0);
  }
  auto pctx = plane_ctx();
  for (int trial = 0; trial < 500; ++trial) {
    auto x = hd::interior<hd::UpperHalfPlane>(testsupport::random_point(rng));
    auto z = hd::interior<hd::UpperHalfPlane>(testsupport::random_point(rng));
    auto e = hd::at_boundary<hd::UpperHalfPlane>(testsupport::random_boundary(rng));
    EXPECT_LE(hd::visual_metric(pctx, x, z), 1.0 + 1e-12);
    EXPECT_LE(hd::visual_metric(pctx, x, e), 1.0 + 1e-12);
    EXPECT_LE(hd::visual_metric(pctx, e, z), 1.0 + 1e-12);
  }
}

TEST(Horofunction, TreeFrozenValues) {
  auto ctx = tree_ctx();
  auto xi = fg::make_end(word("a"), word("a"));
  EXPECT_DOUBLE_EQ(hd::horofunction_eval(ctx, xi, word("a a a")), -3.0);
  EXPECT_DOUBLE_EQ(hd::horofunction_eval(ctx, xi, word("b")), 1.0);
  EXPECT_DOUBLE_EQ(hd::horofunction_eval(ctx, xi, word("a- a-")), 2.0);
  EXPECT_DOUBLE_EQ(hd::horofunction_eval(ctx, xi, word("a b")), 0.0);
  EXPECT_DOUBLE_EQ(hd::horofunction_eval(ctx, xi, ctx.basepoint), 0.0);
}

TEST(Horofunction, PlaneMatchesHeightAtInfinity) {
  auto ctx = plane_ctx();
  hd::CounterRng rng(2026, 13);
  for (int trial = 0; trial < 200; ++trial) {
    auto z = testsupport::random_point(rng);
    EXPECT_NEAR(hd::horofunction_eval(ctx, hd::h2::Boundary::infinity(), z), -std::log(z.im),
                1e-12);
  }
}

TEST(Horofunction, OneLipschitzAlongRandomPairs) {
  auto tctx = tree_ctx();
  hd::CounterRng rng(2026, 14);
  for (int trial = 0; trial < 300; ++trial) {
    auto xi = testsupport::random_end(rng, 2, 3);
    auto z = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(7)) + 1);
    auto w = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(7)) + 1);
    double gap = std::abs(hd::horofunction_eval(tctx, xi, z) - hd::horofunction_eval(tctx, xi, w));
    EXPECT_LE(gap, tctx.space.distance(z, w) + 1e-12);
  }
  auto pctx = plane_ctx();
  for (int trial = 0; trial < 300; ++trial) {
    auto xi = testsupport::random_boundary(rng);
    auto z = testsupport::random_point(rng);
    auto w = testsupport::random_point(rng);
    double gap = std::abs(hd::horofunction_eval(pctx, xi, z) - hd::horofunction_eval(pctx, xi, w));
    EXPECT_LE(gap, pctx.space.distance(z, w) + 1e-9);
  }
}

TEST(Horofunction, TranslationMatchesBoundaryAction) {
  auto tctx = tree_ctx();
  hd::CounterRng rng(2026, 15);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(6)) + 1);
    auto xi = testsupport::random_end(rng, 2, 3);
    auto z = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(6)) + 1);
    double translated = hd::horofunction_translate(tctx, g, xi, z);
    double direct = hd::horofunction_eval(tctx, tctx.space.act(g, xi), z);
    EXPECT_DOUBLE_EQ(translated, direct);
  }
  auto pctx = plane_ctx();
  for (int trial = 0; trial < 300; ++trial) {
    auto g = testsupport::random_sl2(rng, 1.5);
    auto xi = testsupport::random_boundary(rng);
    auto z = testsupport::random_point(rng);
    double translated = hd::horofunction_translate(pctx, g, xi, z);
    double direct = hd::horofunction_eval(pctx, pctx.space.act(g, xi), z);
    EXPECT_NEAR(translated, direct, 1e-9);
  }
}

TEST(ConformalRatio, VanishesForIsometries) {
  auto tctx = tree_ctx();
  hd::CounterRng rng(2026, 16);
  int kept = 0;
  while (kept < 100) {
    auto g = testsupport::random_word(rng, 2, static_cast<int>(rng.next_below(6)) + 1);
    auto xi = testsupport::random_end(rng, 2, 3);
    auto eta = testsupport::random_end(rng, 2, 3);
    if (fg::equal(xi, eta)) continue;
    ++kept;
    EXPECT_DOUBLE_EQ(hd::conformal_ratio_residual(tctx, g, xi, eta), 0.0);
  }
  auto pctx = plane_ctx();
  for (int trial = 0; trial < 300; ++trial) {
    auto g = testsupport::random_sl2(rng, 1.5);
    auto xi = testsupport::random_boundary(rng);
    auto eta = testsupport::random_boundary(rng);
    if (pctx.space.boundary_equal(xi, eta)) continue;
    EXPECT_NEAR(hd::conformal_ratio_residual(pctx, g, xi, eta), 0.0, 1e-9);
  }
}

TEST(ConformalRatio, RejectsEqualDirections) {
  auto ctx = tree_ctx();
  auto xi = fg::make_end(word("a"), word("a"));
  auto eta = fg::make_end(word("a a"), word("a"));
  EXPECT_THROW(hd::conformal_ratio_residual(ctx, word("b"), xi, eta), std::invalid_argument);
}

TEST(GroupDistance, TreeSeparatesGenerators) {
  auto ctx = tree_ctx();
  auto net = hd::bordification_net(ctx, 3);
  auto report = hd::group_distance_lower_report<hd::CayleyTree>(ctx, word("a"), word("b"), net);
  // a and b move some common end to ends with no shared prefix, so the sup
  // over the net reaches the diameter of the gauge.
  EXPECT_DOUBLE_EQ(report.value, 1.0);
  EXPECT_DOUBLE_EQ(
      hd::group_distance_lower<hd::CayleyTree>(ctx, word("a"), word("a"), net), 0.0);
  double ab = hd::group_distance_lower<hd::CayleyTree>(ctx, word("a"), word("b"), net);
  double ba = hd::group_distance_lower<hd::CayleyTree>(ctx, word("b"), word("a"), net);
  EXPECT_DOUBLE_EQ(ab, ba);
}

TEST(GroupDistance, GrowsWithRotationAngle) {
  // In the tree every distinct pair saturates the gauge, so the graded
  // behaviour is exercised on the plane where boundary motion is continuous.
  auto ctx = plane_ctx();
  auto net = hd::bordification_net(ctx, 16);
  auto eye = hd::h2::Matrix{1.0, 0.0, 0.0, 1.0};
  double near = hd::group_distance_lower<hd::UpperHalfPlane>(ctx, eye, testsupport::rotation(0.02), net);
  double far = hd::group_distance_lower<hd::UpperHalfPlane>(ctx, eye, testsupport::rotation(0.7), net);
  EXPECT_GT(near, 0.0);
  EXPECT_GT(far, near);
}

TEST(GroupDistance, PlaneDetectsDistinctIsometries) {
  auto ctx = plane_ctx();
  auto net = hd::bordification_net(ctx, 8);
  auto g1 = testsupport::diagonal(std::exp(0.5));
  auto g2 = testsupport::rotation(0.3);
  auto report = hd::group_distance_lower_report<hd::UpperHalfPlane>(ctx, g1, g2, net);
  EXPECT_GT(report.value, 0.1);
  EXPECT_LE(report.value, 1.0 + 1e-12);
  EXPECT_LT(report.argmax, net.size());
  double self = hd::group_distance_lower<hd::UpperHalfPlane>(ctx, g1, g1, net);
  EXPECT_DOUBLE_EQ(self, 0.0);
}

TEST(GroupDistance, RejectsEmptyNet) {
  auto ctx = tree_ctx();
  std::vector<hd::ExtPoint<hd::CayleyTree>> empty;
  EXPECT_THROW(
      hd::group_distance_lower<hd::CayleyTree>(ctx, word("a"), word("b"), empty),
      std::invalid_argument);
}

TEST(BordificationNet, ShapesMatchResolution) {
  auto tctx = tree_ctx();
  auto tnet = hd::bordification_net(tctx, 2);
  // 12 depth-2 ends plus the basepoint plus near/deep interior words per letter.
  EXPECT_EQ(tnet.size(), 12u + 1u + 4u);
  std::size_t interior_count = 0;
  for (const auto& p : tnet) interior_count += p.index() == 0 ? 1 : 0;
  EXPECT_EQ(interior_count, 5u);

  auto pctx = plane_ctx();
  auto pnet = hd::bordification_net(pctx, 8);
  EXPECT_EQ(pnet.size(), 8u + 4u);
}

}  // namespace
