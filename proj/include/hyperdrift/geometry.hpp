#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "hyperdrift/models.hpp"

namespace hyperdrift {

/// b^{-t} evaluated through the log domain; exponents at or beyond 700 nats
/// clamp to zero (the result would be denormal anyway).
inline double gauge_from_exponent(double t_nats) {
  if (std::isinf(t_nats)) return t_nats > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  if (t_nats >= 700.0) return 0.0;
  return std::exp(-t_nats);
}

/// Gromov product <x, z> seen from `base`. Both arguments may sit in the
/// interior or on the boundary; products against the boundary use the model's
/// closed forms (the limits exist in both shipped models).
template <class S>
double gromov_product(const GeometryContext<S>& ctx, const ExtPoint<S>& x, const ExtPoint<S>& z,
                      const typename S::Point& base) {
  const S& sp = ctx.space;
  if (x.index() == 0 && z.index() == 0) {
    const auto& p = std::get<0>(x);
    const auto& q = std::get<0>(z);
    return 0.5 * (sp.distance(p, base) + sp.distance(base, q) - sp.distance(p, q));
  }
  if (x.index() == 1 && z.index() == 1) {
    return sp.gromov_boundary_pair(std::get<1>(x), std::get<1>(z), base);
  }
  const auto& p = x.index() == 0 ? std::get<0>(x) : std::get<0>(z);
  const auto& xi = x.index() == 1 ? std::get<1>(x) : std::get<1>(z);
  return sp.gromov_to_boundary(p, xi, base);
}

template <class S>
double gromov_product(const GeometryContext<S>& ctx, const ExtPoint<S>& x, const ExtPoint<S>& z) {
  return gromov_product(ctx, x, z, ctx.basepoint);
}

/// Four-point slack <x,z>_w - min(<x,y>_w, <y,z>_w) + delta; nonnegative when
/// the hyperbolic inequality holds at this quadruple.
template <class S>
double four_point_slack(const GeometryContext<S>& ctx, const typename S::Point& x,
                        const typename S::Point& y, const typename S::Point& z,
                        const typename S::Point& w) {
  const S& sp = ctx.space;
  auto prod = [&](const typename S::Point& a, const typename S::Point& c) {
    return 0.5 * (sp.distance(a, w) + sp.distance(w, c) - sp.distance(a, c));
  };
  return prod(x, z) - std::min(prod(x, y), prod(y, z)) + ctx.delta;
}

/// The exponential gauge b^{-<x,z>_base} on the bordification (a genuine
/// metric on the boundary in strongly hyperbolic spaces).
template <class S>
double visual_gauge(const GeometryContext<S>& ctx, const ExtPoint<S>& x, const ExtPoint<S>& z,
                    const typename S::Point& base) {
  return gauge_from_exponent(gromov_product(ctx, x, z, base) * ctx.log_b);
}

template <class S>
double visual_gauge(const GeometryContext<S>& ctx, const ExtPoint<S>& x, const ExtPoint<S>& z) {
  return visual_gauge(ctx, x, z, ctx.basepoint);
}

/// Visual metric D_b = min((log b) d(x, z), b^{-<x,z>_{x0}}), with the
/// distance branch dropping out whenever either argument is at infinity.
/// Always at most 1.
template <class S>
double visual_metric(const GeometryContext<S>& ctx, const ExtPoint<S>& x, const ExtPoint<S>& z) {
  double gauge = visual_gauge(ctx, x, z, ctx.basepoint);
  if (x.index() == 0 && z.index() == 0) {
    double scaled = ctx.log_b * ctx.space.distance(std::get<0>(x), std::get<0>(z));
    return std::min(scaled, gauge);
  }
  return gauge;
}

/// Horofunction of a boundary point, normalised to vanish at the context
/// basepoint: h_xi(z) = d(z, x0) - 2 <xi, z>_{x0}.
template <class S>
double horofunction_eval(const GeometryContext<S>& ctx, const typename S::Boundary& xi,
                         const typename S::Point& z) {
  return ctx.space.distance(z, ctx.basepoint) -
         2.0 * ctx.space.gromov_to_boundary(z, xi, ctx.basepoint);
}

/// The translated horofunction (g . h_xi)(z) = h_xi(g^{-1} z) - h_xi(g^{-1} x0),
/// which coincides with h_{g xi} by equivariance.
template <class S>
double horofunction_translate(const GeometryContext<S>& ctx, const typename S::Isometry& g,
                              const typename S::Boundary& xi, const typename S::Point& z) {
  auto ginv = ctx.space.inverse(g);
  return horofunction_eval(ctx, xi, ctx.space.act(ginv, z)) -
         horofunction_eval(ctx, xi, ctx.space.act(ginv, ctx.basepoint));
}

/// Residual of the conformality identity
///   log_b [gauge(g xi, g eta) / gauge(xi, eta)] = -(h_xi(g^{-1} x0) + h_eta(g^{-1} x0)) / 2,
/// evaluated entirely through Gromov products so no gauge underflows.
template <class S>
double conformal_ratio_residual(const GeometryContext<S>& ctx, const typename S::Isometry& g,
                                const typename S::Boundary& xi, const typename S::Boundary& eta) {
  const S& sp = ctx.space;
  if (sp.boundary_equal(xi, eta)) {
    throw std::invalid_argument("conformal ratio needs two distinct boundary points");
  }
  double before = sp.gromov_boundary_pair(xi, eta, ctx.basepoint);
  double after = sp.gromov_boundary_pair(sp.act(g, xi), sp.act(g, eta), ctx.basepoint);
  auto ginv = sp.inverse(g);
  auto pulled = sp.act(ginv, ctx.basepoint);
  double hx = horofunction_eval(ctx, xi, pulled);
  double he = horofunction_eval(ctx, eta, pulled);
  return std::abs(before - after + 0.5 * (hx + he));
}

template <class S>
struct GroupDistanceReport {
  double value = 0.0;
  std::size_t argmax = 0;
  bool interior_attained = false;
};

/// Net lower bound for the group metric
///   d_G(g1, g2) = max(sup D_b(g1 x, g2 x), sup D_b(g1^{-1} x, g2^{-1} x)),
/// the sups taken over the supplied net of bordification points.
template <class S>
GroupDistanceReport<S> group_distance_lower_report(const GeometryContext<S>& ctx,
                                                   const typename S::Isometry& g1,
                                                   const typename S::Isometry& g2,
                                                   std::span<const ExtPoint<S>> net) {
  if (net.empty()) throw std::invalid_argument("group distance needs a nonempty net");
  const S& sp = ctx.space;
  auto g1i = sp.inverse(g1);
  auto g2i = sp.inverse(g2);
  GroupDistanceReport<S> report;
  report.value = -1.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    double forward = visual_metric(ctx, act_ext(sp, g1, net[i]), act_ext(sp, g2, net[i]));
    double backward = visual_metric(ctx, act_ext(sp, g1i, net[i]), act_ext(sp, g2i, net[i]));
    double v = std::max(forward, backward);
    if (v > report.value) {
      report.value = v;
      report.argmax = i;
      report.interior_attained = net[i].index() == 0;
    }
  }
  return report;
}

template <class S>
double group_distance_lower(const GeometryContext<S>& ctx, const typename S::Isometry& g1,
                            const typename S::Isometry& g2, std::span<const ExtPoint<S>> net) {
  return group_distance_lower_report(ctx, g1, g2, net).value;
}

/// Boundary net plus a few interior samples (points near the basepoint and
/// deeper orbit points toward net directions), so the group-distance sup can
/// flag when an interior sample attains the maximum.
template <class S>
std::vector<ExtPoint<S>> bordification_net(const GeometryContext<S>& ctx, int resolution);

template <>
inline std::vector<ExtPoint<CayleyTree>> bordification_net(const GeometryContext<CayleyTree>& ctx,
                                                           int resolution) {
  std::vector<ExtPoint<CayleyTree>> net;
  for (auto& end : ctx.space.boundary_net(resolution)) {
    net.push_back(at_boundary<CayleyTree>(std::move(end)));
  }
  net.push_back(interior<CayleyTree>(ctx.space.basepoint()));
  for (int g = 1; g <= ctx.space.rank; ++g) {
    net.push_back(interior<CayleyTree>(fg::make_word({static_cast<fg::Letter>(g)}, ctx.space.rank)));
    std::vector<fg::Letter> deep(static_cast<std::size_t>(std::max(2, resolution)),
                                 static_cast<fg::Letter>(g));
    net.push_back(interior<CayleyTree>(fg::make_word(deep, ctx.space.rank)));
  }
  return net;
}

template <>
inline std::vector<ExtPoint<UpperHalfPlane>> bordification_net(
    const GeometryContext<UpperHalfPlane>& ctx, int resolution) {
  std::vector<ExtPoint<UpperHalfPlane>> net;
  for (auto& xi : ctx.space.boundary_net(std::max(4, resolution))) {
    net.push_back(at_boundary<UpperHalfPlane>(xi));
  }
  net.push_back(interior<UpperHalfPlane>(ctx.space.basepoint()));
  double deep = std::exp(static_cast<double>(std::max(2, resolution / 4)));
  net.push_back(interior<UpperHalfPlane>(h2::Point{0.0, deep}));
  net.push_back(interior<UpperHalfPlane>(h2::Point{0.0, 1.0 / deep}));
  net.push_back(interior<UpperHalfPlane>(h2::Point{1.0, 1.0}));
  return net;
}

}  // namespace hyperdrift
