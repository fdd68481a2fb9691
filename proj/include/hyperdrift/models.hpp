#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

#include "hyperdrift/free_group.hpp"
#include "hyperdrift/h2.hpp"

namespace hyperdrift {

/// Cayley graph of the free group of the given rank, with the word metric.
/// Points, isometries and running products are all freely reduced words, so
/// every geometric quantity here is exact integer arithmetic.
struct CayleyTree {
  int rank = 2;

  using Point = fg::Word;
  using Boundary = fg::End;
  using Isometry = fg::Word;
  using Product = fg::Word;

  Point basepoint() const { return fg::Word::identity(rank); }
  double delta() const { return 0.0; }
  double default_base() const { return 2.0; }

  double distance(const Point& x, const Point& y) const {
    return static_cast<double>(fg::distance(x, y));
  }
  bool point_equal(const Point& x, const Point& y) const { return x == y; }
  bool boundary_equal(const Boundary& x, const Boundary& y) const { return fg::equal(x, y); }

  Point act(const Isometry& g, const Point& x) const { return fg::mul(g, x); }
  Boundary act(const Isometry& g, const Boundary& xi) const { return fg::act(g, xi); }
  Isometry inverse(const Isometry& g) const { return fg::inverse(g); }
  Isometry compose(const Isometry& g, const Isometry& h) const { return fg::mul(g, h); }

  double gromov_boundary_pair(const Boundary& xi, const Boundary& eta, const Point& base) const {
    Isometry shift = fg::inverse(base);
    long c = fg::common_prefix_length(fg::act(shift, xi), fg::act(shift, eta));
    if (c < 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(c);
  }

  double gromov_to_boundary(const Point& z, const Boundary& eta, const Point& base) const {
    Isometry shift = fg::inverse(base);
    return static_cast<double>(fg::common_prefix_length(fg::mul(shift, z), fg::act(shift, eta)));
  }

  std::vector<Boundary> boundary_net(int depth) const { return fg::boundary_net(rank, depth); }

  Product product_identity() const { return fg::Word::identity(rank); }
  void product_push(Product& p, const Isometry& step) const {
    fg::check_same_rank(p, step);
    for (fg::Letter l : step.letters) fg::push_reduced(p.letters, l);
  }
  double product_displacement(const Product& p, const Point& base) const {
    if (base.empty()) return static_cast<double>(p.length());
    return static_cast<double>(fg::distance(fg::mul(p, base), base));
  }
  Point product_point(const Product& p, const Point& base) const { return fg::mul(p, base); }

  /// Hitting direction: the common prefix of the half-way and full products,
  /// extended periodically. The segment walked between the checkpoints is the
  /// period guess (exact for eventually periodic orbits); when it is empty or
  /// does not splice reducedly onto the prefix, repeat the last letter.
  Boundary hitting_direction(const Product& half, const Product& full) const {
    std::size_t c = fg::common_prefix_length(half, full);
    if (c == 0) throw std::domain_error("orbit shows no stable direction yet");
    fg::Word w;
    w.rank = rank;
    w.letters.assign(half.letters.begin(), half.letters.begin() + static_cast<long>(c));
    fg::Word segment = fg::mul(fg::inverse(half), full);
    if (!segment.empty()) {
      try {
        return fg::make_end(w, fg::detail::primitive_root(segment));
      } catch (const std::invalid_argument&) {
      }
    }
    fg::Word period;
    period.rank = rank;
    period.letters.push_back(w.letters.back());
    return fg::make_end(std::move(w), std::move(period));
  }
};

/// Upper half-plane with the SL(2, R) Moebius action. Strongly hyperbolic
/// with base e, so the visual-parameter base is fixed to e and delta = ln 2.
struct UpperHalfPlane {
  using Point = h2::Point;
  using Boundary = h2::Boundary;
  using Isometry = h2::Matrix;
  using Product = h2::ScaledMatrix;

  Point basepoint() const { return h2::Point{0.0, 1.0}; }
  double delta() const { return std::numbers::ln2; }
  double default_base() const { return std::numbers::e; }

  double distance(const Point& x, const Point& y) const { return h2::distance(x, y); }
  bool point_equal(const Point& x, const Point& y) const { return x.re == y.re && x.im == y.im; }
  bool boundary_equal(const Boundary& x, const Boundary& y) const { return h2::equal(x, y); }

  Point act(const Isometry& g, const Point& x) const { return h2::act(g, x); }
  Boundary act(const Isometry& g, const Boundary& xi) const { return h2::act(g, xi); }
  Isometry inverse(const Isometry& g) const { return h2::inverse(g); }
  Isometry compose(const Isometry& g, const Isometry& h) const { return h2::mul(g, h); }

  double gromov_boundary_pair(const Boundary& xi, const Boundary& eta, const Point& base) const {
    return h2::gromov_boundary_pair(xi, eta, base);
  }
  double gromov_to_boundary(const Point& z, const Boundary& eta, const Point& base) const {
    return h2::gromov_to_boundary(z, eta, base);
  }

  /// Evenly spaced directions on the circle at infinity; index 0 is the point
  /// at infinity and angle theta maps to -cot(theta / 2).
  std::vector<Boundary> boundary_net(int cells) const {
    if (cells < 2) throw std::invalid_argument("boundary net needs at least two cells");
    std::vector<Boundary> net;
    net.reserve(static_cast<std::size_t>(cells));
    net.push_back(Boundary::infinity());
    for (int j = 1; j < cells; ++j) {
      double theta = 2.0 * std::numbers::pi * j / cells;
      net.push_back(Boundary::at(-1.0 / std::tan(0.5 * theta)));
    }
    return net;
  }

  Product product_identity() const { return h2::ScaledMatrix{}; }
  void product_push(Product& p, const Isometry& step) const { h2::push(p, step); }
  double product_displacement(const Product& p, const Point& base) const {
    return h2::displacement_at(p, base);
  }
  Point product_point(const Product& p, const Point& base) const { return h2::act(p, base); }

  Boundary hitting_direction(const Product&, const Product& full) const {
    return h2::top_direction(full);
  }
};

/// Geometry parameters shared by every operation: the space, the reference
/// point x0, and the visual parameter b (with delta the hyperbolicity
/// constant of the model).
template <class S>
struct GeometryContext {
  S space;
  typename S::Point basepoint;
  double b = 2.0;
  double delta = 0.0;
  double log_b = std::numbers::ln2;
};

template <class S>
GeometryContext<S> make_context(S space, double b) {
  GeometryContext<S> ctx;
  if (!(b > 1.0) || !std::isfinite(b)) throw std::invalid_argument("visual parameter b must exceed 1");
  ctx.delta = space.delta();
  if (ctx.delta > 0.0 && std::log(b) > std::numbers::ln2 / ctx.delta + 1e-12) {
    throw std::invalid_argument("visual parameter violates b <= 2^(1/delta)");
  }
  ctx.basepoint = space.basepoint();
  ctx.space = std::move(space);
  ctx.b = b;
  ctx.log_b = std::log(b);
  return ctx;
}

template <class S>
GeometryContext<S> make_context(S space) {
  double b = space.default_base();
  return make_context(std::move(space), b);
}

/// A point of the bordification: interior point or boundary point.
template <class S>
using ExtPoint = std::variant<typename S::Point, typename S::Boundary>;

template <class S>
ExtPoint<S> interior(typename S::Point p) {
  return ExtPoint<S>{std::in_place_index<0>, std::move(p)};
}

template <class S>
ExtPoint<S> at_boundary(typename S::Boundary b) {
  return ExtPoint<S>{std::in_place_index<1>, std::move(b)};
}

template <class S>
ExtPoint<S> act_ext(const S& space, const typename S::Isometry& g, const ExtPoint<S>& x) {
  if (x.index() == 0) return ExtPoint<S>{std::in_place_index<0>, space.act(g, std::get<0>(x))};
  return ExtPoint<S>{std::in_place_index<1>, space.act(g, std::get<1>(x))};
}

}  // namespace hyperdrift
