#include "hyperdrift/transfer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "hyperdrift/rng.hpp"

namespace hd = hyperdrift;
namespace fg = hyperdrift::fg;

namespace {

fg::Word word(const char* text, int rank = 2) { return fg::parse_word(text, rank); }

fg::End end(const char* prefix, const char* period, int rank = 2) {
  return fg::make_end(word(prefix, rank), word(period, rank));
}

hd::ObservedSystem<hd::CayleyTree> tree_system(std::vector<std::vector<double>> kernel_rows,
                                               std::vector<const char*> words, int resolution) {
  auto ctx = hd::make_context(hd::CayleyTree{2}, 2.0);
  std::vector<fg::Word> table;
  for (const char* w : words) table.push_back(word(w));
  return hd::make_observed_system(ctx, hd::make_kernel(std::move(kernel_rows)), std::move(table),
                                  resolution);
}

hd::ObservedSystem<hd::UpperHalfPlane> plane_system(std::vector<std::vector<double>> kernel_rows,
                                                    std::vector<hd::h2::Matrix> table,
                                                    int resolution) {
  auto ctx = hd::make_context(hd::UpperHalfPlane{});
  return hd::make_observed_system(ctx, hd::make_kernel(std::move(kernel_rows)), std::move(table),
                                  resolution);
}

hd::h2::Matrix rotation(double s) { return {std::cos(s), std::sin(s), -std::sin(s), std::cos(s)}; }

TEST(ObservedSystem, ValidatesAndComputesItsStationaryMeasure) {
  auto sys = tree_system({{0.3, 0.7}, {0.6, 0.4}}, {"a", "a b", "b-", "b a"}, 2);
  EXPECT_EQ(sys.states(), 2);
  EXPECT_EQ(sys.cells(), 12);
  EXPECT_NEAR(sys.mu.weights[0], 6.0 / 13.0, 1e-9);
  EXPECT_NEAR(sys.mu.weights[1], 7.0 / 13.0, 1e-9);

  auto ctx = hd::make_context(hd::CayleyTree{2}, 2.0);
  EXPECT_THROW(
      hd::make_observed_system(ctx, hd::make_kernel({{0.5, 0.5}, {0.5, 0.5}}),
                               std::vector<fg::Word>{word("a")}, 2),
      std::invalid_argument);
  // Reducible kernels have no unique stationary measure.
  EXPECT_THROW(hd::make_observed_system(
                   ctx, hd::make_kernel({{1.0, 0.0}, {0.0, 1.0}}),
                   std::vector<fg::Word>{word("a"), word("a"), word("b"), word("b")}, 2),
               std::invalid_argument);
}

TEST(Snap, TreeCellsFollowThePrefix) {
  auto sys = tree_system({{1.0}}, {"a"}, 2);
  int cell_ab = hd::snap(sys, end("a b", "b"));
  EXPECT_EQ(hd::snap(sys, end("a b a-", "a-")), cell_ab);
  EXPECT_NE(hd::snap(sys, end("a a", "a")), cell_ab);
  // Every net representative snaps to itself.
  for (int j = 0; j < sys.cells(); ++j) {
    EXPECT_EQ(hd::snap(sys, sys.net[static_cast<std::size_t>(j)]), j);
  }
}

TEST(Snap, CircleCellsRoundTripAndClampInfinity) {
  auto sys = plane_system({{1.0}}, {rotation(0.0)}, 8);
  EXPECT_EQ(hd::snap(sys, hd::h2::Boundary::infinity()), 0);
  for (int j = 0; j < sys.cells(); ++j) {
    EXPECT_EQ(hd::snap(sys, sys.net[static_cast<std::size_t>(j)]), j);
  }
  // A slight nudge keeps the cell.
  EXPECT_EQ(hd::snap(sys, hd::h2::Boundary::at(sys.net[3].xi + 1e-6)), 3);
}

TEST(GridGeometry, MeshAndSeparationScales) {
  auto coarse = tree_system({{1.0}}, {"a"}, 1);
  EXPECT_DOUBLE_EQ(hd::snap_mesh(coarse), 0.5);
  EXPECT_DOUBLE_EQ(hd::min_cell_separation(coarse), 1.0);

  auto finer = tree_system({{1.0}}, {"a"}, 3);
  EXPECT_DOUBLE_EQ(hd::snap_mesh(finer), 0.125);
  // Neighbouring depth-3 cells share two letters.
  EXPECT_DOUBLE_EQ(hd::min_cell_separation(finer), 0.25);

  auto circle = plane_system({{1.0}}, {rotation(0.0)}, 16);
  EXPECT_GT(hd::snap_mesh(circle), 0.0);
  EXPECT_LT(hd::snap_mesh(circle), hd::min_cell_separation(circle));
}

TEST(LaplaceMarkov, PreservesConstantsAtZeroParameter) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 2);
  auto ones = hd::make_grid_function(2, sys.cells());
  for (auto& v : ones.values) v = 1.0;
  auto image = hd::laplace_markov_apply(sys, {0.0, 0.0}, ones);
  for (const auto& v : image.values) {
    EXPECT_DOUBLE_EQ(v.real(), 1.0);
    EXPECT_DOUBLE_EQ(v.imag(), 0.0);
  }
}

TEST(LaplaceMarkov, SkewAveragingMatchesHandEnumeration) {
  // Two states, four cells at depth 1; steps g(0,.) = {a, b}, g(1,.) = {b-, a}.
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 1);
  int ca = hd::snap(sys, end("", "a"));
  int cA = hd::snap(sys, end("", "a-"));
  int cb = hd::snap(sys, end("", "b"));
  int cB = hd::snap(sys, end("", "b-"));

  auto f = hd::make_grid_function(2, 4);
  for (int w = 0; w < 2; ++w) {
    f.at(w, ca) = 1.0 + 8.0 * w;
    f.at(w, cA) = 2.0 + 8.0 * w;
    f.at(w, cb) = 3.0 + 8.0 * w;
    f.at(w, cB) = 4.0 + 8.0 * w;
  }
  auto image = hd::laplace_markov_apply(sys, {0.0, 0.0}, f);

  // From state 0 at cell a^inf: a^-1 a^inf = a^inf, b^-1 a^inf -> b- cell.
  EXPECT_DOUBLE_EQ(image.at(0, ca).real(), 0.5 * f.at(0, ca).real() + 0.5 * f.at(1, cB).real());
  // From state 0 at cell b^inf: a^-1 b^inf -> a- cell, b^-1 b^inf = b^inf.
  EXPECT_DOUBLE_EQ(image.at(0, cb).real(), 0.5 * f.at(0, cA).real() + 0.5 * f.at(1, cb).real());
  // From state 1 at cell a^inf: b a^inf -> b cell, a^-1 a^inf = a^inf.
  EXPECT_DOUBLE_EQ(image.at(1, ca).real(), 0.5 * f.at(0, cb).real() + 0.5 * f.at(1, ca).real());
}

TEST(LaplaceMarkov, BoundaryConstantFunctionsReduceToTheMarkovOperator) {
  auto sys = tree_system({{0.3, 0.7}, {0.6, 0.4}}, {"a", "a b", "b-", "b a"}, 2);
  std::vector<double> v{1.25, -0.5};
  auto f = hd::make_grid_function(2, sys.cells());
  for (int w = 0; w < 2; ++w) {
    for (int i = 0; i < sys.cells(); ++i) f.at(w, i) = v[static_cast<std::size_t>(w)];
  }
  auto direct = hd::markov_operator_apply(sys.kernel, v);
  auto image = hd::laplace_markov_apply(sys, {0.0, 0.0}, f);
  auto image2 = hd::laplace_markov_apply(sys, {0.0, 0.0}, image);
  auto direct2 = hd::markov_operator_apply(sys.kernel, direct);
  for (int w = 0; w < 2; ++w) {
    for (int i = 0; i < sys.cells(); ++i) {
      EXPECT_NEAR(image.at(w, i).real(), direct[static_cast<std::size_t>(w)], 1e-14);
      EXPECT_NEAR(image2.at(w, i).real(), direct2[static_cast<std::size_t>(w)], 1e-14);
      EXPECT_DOUBLE_EQ(image.at(w, i).imag(), 0.0);
    }
  }
}

TEST(LaplaceMarkov, SingleStateWeightsAreHorofunctionPowers) {
  // One state, constant step a, depth-1 cells, b = 2, z real.
  auto sys = tree_system({{1.0}}, {"a"}, 1);
  int ca = hd::snap(sys, end("", "a"));
  int cA = hd::snap(sys, end("", "a-"));
  int cb = hd::snap(sys, end("", "b"));

  auto f = hd::make_grid_function(1, 4);
  for (int i = 0; i < 4; ++i) f.at(0, i) = 1.0 + i;

  auto image = hd::laplace_markov_apply(sys, {1.0, 0.0}, f);
  // h_{a^inf}(a x0) = -1: weight 2^-1; argument a^-1 a^inf stays in cell a.
  EXPECT_DOUBLE_EQ(image.at(0, ca).real(), 0.5 * f.at(0, ca).real());
  // h_{b^inf}(a x0) = +1: weight 2; argument a^-1 b^inf lands in cell a-.
  EXPECT_DOUBLE_EQ(image.at(0, cb).real(), 2.0 * f.at(0, cA).real());

  // A purely imaginary parameter only rotates the phase.
  auto spun = hd::laplace_markov_apply(sys, {0.0, 1.0}, f);
  EXPECT_NEAR(std::abs(spun.at(0, cb)), std::abs(f.at(0, cA)), 1e-12);
  EXPECT_NEAR(std::arg(spun.at(0, cb)), std::numbers::ln2, 1e-12);

  EXPECT_THROW(hd::laplace_markov_apply(sys, {1.5, 0.0}, f), std::domain_error);
  auto wrong = hd::make_grid_function(1, 5);
  EXPECT_THROW(hd::laplace_markov_apply(sys, {0.0, 0.0}, wrong), std::invalid_argument);
}

TEST(HolderSeminorm, FrozenIndicatorAndDistanceFunctions) {
  auto sys = tree_system({{1.0}}, {"a"}, 2);
  auto f = hd::make_grid_function(1, sys.cells());
  f.at(0, 3) = 1.0;
  // Closest distinct cells sit at D = 1/2, so the quotient peaks at 2.
  EXPECT_DOUBLE_EQ(hd::holder_seminorm(sys, f, 1.0), 2.0);
  EXPECT_NEAR(hd::holder_seminorm(sys, f, 0.5), std::numbers::sqrt2, 1e-12);
  EXPECT_DOUBLE_EQ(hd::holder_norm(sys, f, 1.0), 3.0);

  auto constant = hd::make_grid_function(1, sys.cells());
  for (auto& v : constant.values) v = 4.2;
  EXPECT_DOUBLE_EQ(hd::holder_seminorm(sys, constant, 0.7), 0.0);

  // f = D(., xi*) is 1-Lipschitz for the visual metric.
  auto dist = hd::make_grid_function(1, sys.cells());
  for (int i = 0; i < sys.cells(); ++i) {
    dist.at(0, i) = hd::visual_metric(sys.ctx, hd::at_boundary<hd::CayleyTree>(sys.net[0]),
                                      hd::at_boundary<hd::CayleyTree>(sys.net[static_cast<std::size_t>(i)]));
  }
  EXPECT_LE(hd::holder_seminorm(sys, dist, 1.0), 1.0 + 1e-12);

  EXPECT_THROW(hd::holder_seminorm(sys, f, 1.5), std::invalid_argument);
}

TEST(HolderSeminorm, InterpolatesBetweenExponents) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 2);
  hd::CounterRng rng(404, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto f = hd::make_grid_function(2, sys.cells());
    for (auto& v : f.values) v = rng.next_range(-1.0, 1.0);
    double a0 = 0.2, a1 = 0.5, a2 = 0.9;
    double u0 = hd::holder_seminorm(sys, f, a0);
    double u1 = hd::holder_seminorm(sys, f, a1);
    double u2 = hd::holder_seminorm(sys, f, a2);
    double t = (a2 - a1) / (a2 - a0);
    EXPECT_LE(u1, std::pow(u0, t) * std::pow(u2, 1.0 - t) * (1.0 + 1e-12));
  }
}

TEST(AvgHolder, IdentityCocycleIsExactlyOne) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"1", "1", "1", "1"}, 2);
  for (int n : {1, 3}) {
    for (double alpha : {0.2, 1.0}) {
      auto est = hd::avg_holder_const(sys, n, alpha, 50, 3);
      EXPECT_DOUBLE_EQ(est.value, 1.0);
      EXPECT_DOUBLE_EQ(est.std_error, 0.0);
    }
  }
}

TEST(AvgHolder, SmallAlphaIsDominatedByDinf) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 2);
  // alpha < 1/n keeps the constant below d_inf = b^(max displacement) = 2.
  auto est = hd::avg_holder_const(sys, 3, 0.3, 2000, 11);
  EXPECT_GT(est.value, 0.0);
  EXPECT_LE(est.value, 2.0 + 3.0 * est.std_error);
  EXPECT_THROW(hd::avg_holder_const(sys, 0, 0.3, 10, 1), std::invalid_argument);
  EXPECT_THROW(hd::avg_holder_const(sys, 3, 0.0, 10, 1), std::invalid_argument);
}

TEST(AvgHolder, SubMultiplicativeAcrossHorizons) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 2);
  double alpha = 0.5;
  auto k2 = hd::avg_holder_const(sys, 2, alpha, 3000, 19);
  auto k3 = hd::avg_holder_const(sys, 3, alpha, 3000, 19);
  auto k5 = hd::avg_holder_const(sys, 5, alpha, 3000, 19);
  double combined = k5.std_error + k2.value * k3.std_error + k3.value * k2.std_error;
  EXPECT_LE(k5.value, k2.value * k3.value + 3.0 * combined);
}

TEST(AvgHolder, ContractsGeometricallyOnTheTwoStateSystem) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 2);
  auto early = hd::avg_holder_const(sys, 2, 0.5, 3000, 23);
  auto late = hd::avg_holder_const(sys, 8, 0.5, 3000, 23);
  EXPECT_LT(late.value, early.value);
}

TEST(AvgHolder, ContractionTransfersToTheOperator) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 3);
  int n = 3;
  double alpha = 0.4;
  auto k = hd::avg_holder_const(sys, n, alpha, 4000, 29);
  double mesh = hd::snap_mesh(sys);
  double sep = hd::min_cell_separation(sys);
  hd::CounterRng rng(31, 0);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = hd::make_grid_function(2, sys.cells());
    for (auto& v : f.values) v = rng.next_range(-1.0, 1.0);
    double before = hd::holder_seminorm(sys, f, alpha);
    auto iterated = f;
    for (int i = 0; i < n; ++i) iterated = hd::laplace_markov_apply(sys, {0.0, 0.0}, iterated);
    double after = hd::holder_seminorm(sys, iterated, alpha);
    double snap_slack =
        2.0 * n * before * std::pow(mesh, alpha) / std::pow(sep, alpha);
    EXPECT_LE(after, (k.value + 3.0 * k.std_error) * before + snap_slack);
  }
}

TEST(Irreducibility, SingleStateFixedPointsGiveWitnesses) {
  auto diag = plane_system({{1.0}}, {{std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2}}, 8);
  auto report = hd::irreducibility_heuristic(diag);
  EXPECT_EQ(report.verdict, hd::Reducibility::reducible_witness);
  ASSERT_EQ(report.witness.size(), 1u);
  EXPECT_EQ(report.witness[0], 0);  // the infinity cell is fixed by the diagonal

  auto tree = tree_system({{1.0}}, {"a"}, 3);
  auto tree_report = hd::irreducibility_heuristic(tree);
  EXPECT_EQ(tree_report.verdict, hd::Reducibility::reducible_witness);
  EXPECT_EQ(tree_report.witness[0], hd::snap(tree, end("", "a")));
}

TEST(Irreducibility, SwapChainFollowsThePeriodicAxis) {
  auto sys = tree_system({{0.0, 1.0}, {1.0, 0.0}}, {"1", "a", "b", "1"}, 2);
  auto report = hd::irreducibility_heuristic(sys);
  EXPECT_EQ(report.verdict, hd::Reducibility::reducible_witness);
  ASSERT_EQ(report.witness.size(), 2u);
  EXPECT_EQ(report.witness[0], hd::snap(sys, end("", "b a")));
  EXPECT_EQ(report.witness[1], hd::snap(sys, end("", "a b")));
}

TEST(Irreducibility, ConflictingConstraintsYieldEvidence) {
  auto sys = tree_system({{0.5, 0.5}, {0.5, 0.5}}, {"a", "b", "b-", "a"}, 3);
  auto report = hd::irreducibility_heuristic(sys);
  EXPECT_EQ(report.verdict, hd::Reducibility::irreducible_evidence);
  EXPECT_GT(report.candidates_checked, 30);

  hd::h2::Matrix pa{1.0, 2.0, 0.0, 1.0};
  hd::h2::Matrix pb{1.0, 0.0, 2.0, 1.0};
  auto plane = plane_system({{0.5, 0.5}, {0.5, 0.5}}, {pa, pb, pb, pa}, 8);
  EXPECT_EQ(hd::irreducibility_heuristic(plane).verdict,
            hd::Reducibility::irreducible_evidence);
}

TEST(Irreducibility, CoarseOnlyHitsStayInconclusive) {
  // A small rotation keeps every coarse cell in place but shifts the refined
  // grid by most of a cell, so the coarse witness dissolves on refinement.
  auto sys = plane_system({{1.0}}, {rotation(0.15)}, 8);
  auto report = hd::irreducibility_heuristic(sys);
  EXPECT_EQ(report.verdict, hd::Reducibility::inconclusive);
  EXPECT_EQ(report.resolution, 8);
  EXPECT_EQ(report.refined_resolution, 16);
}

}  // namespace
