#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hyperdrift/geometry.hpp"

namespace hyperdrift {

/// Result of checking a chain x_0..x_n against the gap/angle hypotheses
///   G) d(x_{i-1}, x_i) >= gap,
///   A) <x_{i-1}, x_{i+1}>_{x_i} <= angle,
///   P) 2 angle < gap - 2 delta,
/// and, when they hold, the margins of the three conclusions. Margins are
/// bound minus attained value, so a nonnegative margin means the conclusion
/// holds (tree chains are exact; H2 chains are checked within a small
/// tolerance by callers).
struct ApReport {
  int n = 0;
  double gap = 0.0;
  double angle = 0.0;
  std::vector<double> gap_slacks;
  std::vector<double> angle_slacks;
  double compat_slack = 0.0;
  std::optional<double> endpoint_angle_margin;
  std::optional<double> displacement_margin;
  std::optional<double> sum_identity_margin;
  bool satisfied = false;
};

/// Core checker over an arbitrary distance oracle dist(i, j) for indices into
/// the chain. Only consecutive pairs, skip-one pairs and the pairs (0, n-1),
/// (0, n) are ever queried.
template <class Dist>
ApReport ap_check_with(Dist&& dist, int n, double gap, double angle, double b, double delta) {
  if (n < 2) throw std::invalid_argument("avalanche chain needs at least 3 points");
  if (!(gap > 0.0)) throw std::invalid_argument("gap bound must be positive");
  if (angle < 0.0) throw std::invalid_argument("angle bound must be nonnegative");

  ApReport report;
  report.n = n;
  report.gap = gap;
  report.angle = angle;

  std::vector<double> step(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    step[static_cast<std::size_t>(i - 1)] = dist(i - 1, i);
    report.gap_slacks.push_back(step[static_cast<std::size_t>(i - 1)] - gap);
  }
  std::vector<double> skip(static_cast<std::size_t>(n - 1));
  for (int i = 1; i <= n - 1; ++i) {
    skip[static_cast<std::size_t>(i - 1)] = dist(i - 1, i + 1);
    double product = 0.5 * (step[static_cast<std::size_t>(i - 1)] +
                            step[static_cast<std::size_t>(i)] -
                            skip[static_cast<std::size_t>(i - 1)]);
    report.angle_slacks.push_back(angle - product);
  }
  report.compat_slack = gap - 2.0 * delta - 2.0 * angle;

  bool ok = report.compat_slack > 0.0;
  for (double s : report.gap_slacks) ok = ok && s >= 0.0;
  for (double s : report.angle_slacks) ok = ok && s >= 0.0;
  report.satisfied = ok;
  if (!ok) return report;

  double log_b = std::log(b);
  double leak = std::exp((2.0 * angle - gap + 2.0 * delta) * log_b) / log_b;
  double end_to_end = dist(0, n);

  double end_product;
  if (n == 2) {
    end_product = 0.5 * (step[0] + step[1] - end_to_end);
  } else {
    double to_last = dist(0, n - 1);
    end_product = 0.5 * (to_last + step[static_cast<std::size_t>(n - 1)] - end_to_end);
  }
  report.endpoint_angle_margin = angle + leak - end_product;

  report.displacement_margin =
      end_to_end - gap - (n - 1) * (gap - 2.0 * angle - 2.0 * delta);

  double lhs = end_to_end;
  for (int i = 2; i <= n - 1; ++i) lhs += step[static_cast<std::size_t>(i - 1)];
  for (int i = 1; i <= n - 1; ++i) lhs -= skip[static_cast<std::size_t>(i - 1)];
  report.sum_identity_margin = 2.0 * (n - 1) * leak - std::abs(lhs);

  return report;
}

/// Checks a chain of bordification interior points.
template <class S>
ApReport check_avalanche(const GeometryContext<S>& ctx, std::span<const typename S::Point> points,
                         double gap, double angle) {
  if (points.size() < 3) throw std::invalid_argument("avalanche chain needs at least 3 points");
  auto dist = [&](int i, int j) {
    return ctx.space.distance(points[static_cast<std::size_t>(i)],
                              points[static_cast<std::size_t>(j)]);
  };
  return ap_check_with(dist, static_cast<int>(points.size()) - 1, gap, angle, ctx.b, ctx.delta);
}

/// Checks the orbit chain x_j = s_1 ... s_j x0 of a list of isometries.
/// Distances are evaluated as displacements of segment products, which stays
/// accurate for chains far too deep for raw point coordinates.
template <class S>
ApReport check_avalanche_chain(const GeometryContext<S>& ctx,
                               std::span<const typename S::Isometry> steps, double gap,
                               double angle) {
  if (steps.size() < 2) throw std::invalid_argument("avalanche chain needs at least 3 orbit points");
  const S& sp = ctx.space;
  auto dist = [&](int i, int j) {
    if (i > j) std::swap(i, j);
    auto p = sp.product_identity();
    for (int k = i; k < j; ++k) sp.product_push(p, steps[static_cast<std::size_t>(k)]);
    return sp.product_displacement(p, ctx.basepoint);
  };
  return ap_check_with(dist, static_cast<int>(steps.size()), gap, angle, ctx.b, ctx.delta);
}

/// Matrix form of the chain check: hypotheses ||g_j||^2 >= mu and
/// ||g_{j-1} g_j|| >= nu ||g_{j-1}|| ||g_j|| translate to gap = ln mu and
/// angle = -ln nu, and the conclusions are read off the orbit g_1...g_j i.
inline ApReport ap_matrix_form(std::span<const h2::Matrix> matrices, double mu, double nu) {
  if (matrices.size() < 2) {
    throw std::invalid_argument("matrix avalanche needs at least 2 matrices (3 orbit points)");
  }
  if (!(mu > 1.0)) throw std::invalid_argument("norm-gap parameter mu must exceed 1");
  if (!(nu > 0.0) || nu > 1.0) throw std::invalid_argument("alignment parameter nu must lie in (0, 1]");
  for (const auto& m : matrices) h2::check_unimodular(m);
  auto ctx = make_context(UpperHalfPlane{});
  return check_avalanche_chain<UpperHalfPlane>(ctx, matrices, std::log(mu), -std::log(nu));
}

}  // namespace hyperdrift
