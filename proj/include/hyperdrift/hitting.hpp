#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hyperdrift/cocycle.hpp"
#include "hyperdrift/drift.hpp"
#include "hyperdrift/geometry.hpp"
#include "hyperdrift/parallel.hpp"

namespace hyperdrift {

struct GromovGrowthEntry {
  int m = 0;
  int m2 = 0;
  double product = 0.0;  // <p^(m) x0, p^(m2) x0>_{x0}
};

template <class S>
struct HittingEstimate {
  int n = 0;
  typename S::Boundary boundary_point;
  std::vector<GromovGrowthEntry> gromov_growth;
  double cauchy_gap = 0.0;  // b^(-<p^(n), p^(2n)>)
};

namespace detail {

/// The statistical gate for boundary operations: the walk must show drift
/// clearly above its own noise before a hitting direction means anything.
template <class S>
void require_positive_drift(const Cocycle<S>& c, std::uint64_t seed, std::uint64_t stream_base) {
  DriftEstimate gate = finite_scale_drift(c, 200, 64, seed, 1, stream_base);
  if (!(gate.mean > 0.0) || !(gate.mean > 3.0 * gate.std_error)) {
    throw std::domain_error("cocycle shows no positive drift at the gate horizon");
  }
}

}  // namespace detail

/// Walks one realization out to 2n and reads off the orbit direction from
/// the checkpoints at n/2, n and 2n. Segment displacements are accumulated
/// from their own start, never by inverting a deep product, so the Gromov
/// products stay accurate at any depth.
template <class S>
HittingEstimate<S> hitting_point(const GeometryContext<S>& ctx, const Cocycle<S>& c, int n,
                                 std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("hitting point needs a horizon of at least 2");
  detail::require_positive_drift(c, seed, 1);

  int half = n / 2;
  PathStepper<S> walker(c, seed, 0);
  typename S::Product at_half = c.space.product_identity();
  typename S::Product at_n = c.space.product_identity();
  typename S::Product seg_half_n = c.space.product_identity();
  typename S::Product seg_n_2n = c.space.product_identity();
  for (int i = 1; i <= 2 * n; ++i) {
    const auto& step = walker.advance();
    if (i > half && i <= n) c.space.product_push(seg_half_n, step);
    if (i > n) c.space.product_push(seg_n_2n, step);
    if (i == half) at_half = walker.product;
    if (i == n) at_n = walker.product;
  }

  const auto& base = ctx.basepoint;
  double d_half = c.space.product_displacement(at_half, base);
  double d_n = c.space.product_displacement(at_n, base);
  double d_2n = c.space.product_displacement(walker.product, base);
  double d_seg1 = c.space.product_displacement(seg_half_n, base);
  double d_seg2 = c.space.product_displacement(seg_n_2n, base);

  HittingEstimate<S> out;
  out.n = n;
  out.boundary_point = c.space.hitting_direction(at_half, at_n);
  out.gromov_growth.push_back({half, n, 0.5 * (d_half + d_n - d_seg1)});
  out.gromov_growth.push_back({n, 2 * n, 0.5 * (d_n + d_2n - d_seg2)});
  out.cauchy_gap = gauge_from_exponent(out.gromov_growth.back().product * ctx.log_b);
  return out;
}

/// Monte-Carlo d1 between two cocycles riding the same driver: both orbit
/// directions are read from the one state path, then compared in the visual
/// metric. Sample i owns substream i; the drift gates sit above 2^20.
template <class S>
double d1_distance(const GeometryContext<S>& ctx, const Cocycle<S>& c1, const Cocycle<S>& c2,
                   int n, int samples, std::uint64_t seed, int threads = 1) {
  if (n < 2) throw std::invalid_argument("d1 needs a horizon of at least 2");
  if (samples < 1) throw std::invalid_argument("d1 needs at least one sample");
  check_shared_driver(c1, c2);
  detail::require_positive_drift(c1, seed, std::uint64_t{1} << 20);
  detail::require_positive_drift(c2, seed, (std::uint64_t{1} << 20) + 64);

  int half = n / 2;
  std::vector<double> values(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    PathStepper<S> walker(c1, seed, i);
    typename S::Product p2 = c2.space.product_identity();
    typename S::Product half1 = c1.space.product_identity();
    typename S::Product half2 = c2.space.product_identity();
    for (int k = 1; k <= n; ++k) {
      int prev = walker.state;
      walker.advance();
      c2.space.product_push(p2, step_isometry(c2, prev, walker.state));
      if (k == half) {
        half1 = walker.product;
        half2 = p2;
      }
    }
    auto xi1 = c1.space.hitting_direction(half1, walker.product);
    auto xi2 = c2.space.hitting_direction(half2, p2);
    values[i] = visual_metric(ctx, at_boundary<S>(xi1), at_boundary<S>(xi2));
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(samples);
}

/// Residual of the horofunction sum identity along one sampled path:
/// sum_i h_{xi_i}(s_{i+1} x0) with xi_{i+1} = s_{i+1}^{-1} xi_i collapses to
/// h_{xi_0}(g^{(n)} x0).
template <class S>
double telescoping_check(const GeometryContext<S>& ctx, const Cocycle<S>& c,
                         const typename S::Boundary& xi0, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("telescoping check needs at least one step");
  PathStepper<S> walker(c, seed, 0);
  typename S::Boundary xi = xi0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& step = walker.advance();
    sum += horofunction_eval(ctx, xi, ctx.space.act(step, ctx.basepoint));
    xi = ctx.space.act(ctx.space.inverse(step), xi);
  }
  double rhs = horofunction_eval(ctx, xi0, c.space.product_point(walker.product, ctx.basepoint));
  return std::abs(sum - rhs);
}

}  // namespace hyperdrift
