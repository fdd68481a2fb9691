#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hyperdrift::h2 {

struct Point {
  double re = 0.0;
  double im = 1.0;
};

inline void check_point(const Point& z) {
  if (!(z.im > 0.0) || !std::isfinite(z.re) || !std::isfinite(z.im)) {
    throw std::invalid_argument("upper half-plane point needs finite coordinates, im > 0");
  }
}

/// A point of the circle at infinity: a real number or the point at infinity.
struct Boundary {
  double xi = 0.0;
  bool infinite = false;

  static Boundary infinity() { return Boundary{0.0, true}; }
  static Boundary at(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("finite boundary coordinate expected");
    return Boundary{x, false};
  }
};

inline bool equal(const Boundary& a, const Boundary& b) {
  if (a.infinite || b.infinite) return a.infinite && b.infinite;
  return a.xi == b.xi;
}

struct Matrix {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
};

inline double det(const Matrix& m) { return m.a * m.d - m.b * m.c; }

inline void check_unimodular(const Matrix& m, double tol = 1e-12) {
  if (std::abs(det(m) - 1.0) > tol) {
    throw std::invalid_argument("matrix determinant differs from 1 beyond tolerance");
  }
}

inline Matrix mul(const Matrix& x, const Matrix& y) {
  return Matrix{x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
                x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

/// Inverse of a determinant-1 matrix (the adjugate).
inline Matrix inverse(const Matrix& m) { return Matrix{m.d, -m.b, -m.c, m.a}; }

inline double frobenius_sq(const Matrix& m) {
  return m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
}

/// Largest singular value squared, from the characteristic polynomial of
/// m^T m: s^2 = (p + sqrt(p^2 - 4 det^2)) / 2 with p the squared Frobenius norm.
inline double op_norm_sq(const Matrix& m) {
  double p = frobenius_sq(m);
  double dt = det(m);
  double disc = p * p - 4.0 * dt * dt;
  return 0.5 * (p + std::sqrt(std::max(disc, 0.0)));
}

/// d(m.i, i) = 2 ln ||m|| for determinant-1 matrices.
inline double displacement(const Matrix& m) { return std::log(op_norm_sq(m)); }

/// Distance via d = 2 asinh(|z - w| / (2 sqrt(im_z im_w))), the stable form of
/// arccosh(1 + |z - w|^2 / (2 im_z im_w)).
inline double distance(const Point& z, const Point& w) {
  double dx = z.re - w.re;
  double dy = z.im - w.im;
  double q = std::hypot(dx, dy) / (2.0 * std::sqrt(z.im * w.im));
  return 2.0 * std::asinh(q);
}

inline Point act(const Matrix& m, const Point& z) {
  double cr = m.c * z.re + m.d;
  double ci = m.c * z.im;
  double den = cr * cr + ci * ci;
  if (den == 0.0) throw std::domain_error("moebius image of interior point degenerated");
  double ar = m.a * z.re + m.b;
  double ai = m.a * z.im;
  return Point{(ar * cr + ai * ci) / den, det(m) * z.im / den};
}

inline Boundary act(const Matrix& m, const Boundary& xi) {
  if (xi.infinite) {
    return m.c == 0.0 ? Boundary::infinity() : Boundary::at(m.a / m.c);
  }
  double den = m.c * xi.xi + m.d;
  if (den == 0.0) return Boundary::infinity();
  return Boundary::at((m.a * xi.xi + m.b) / den);
}

/// Running product of determinant-1 matrices held as e^{log_scale} * m with m
/// kept at unit Frobenius norm, so entries stay O(1) for arbitrarily long
/// products. The true determinant is 1, hence det(m) = e^{-2 log_scale}; the
/// analytic value is used wherever the raw ad - bc would cancel to noise.
struct ScaledMatrix {
  Matrix m{1.0 / std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2};
  double log_scale = 0.5 * std::numbers::ln2;
  int pushes = 0;
};

inline double analytic_det(const ScaledMatrix& p) { return std::exp(-2.0 * p.log_scale); }

inline void normalize(ScaledMatrix& p) {
  double f = std::sqrt(frobenius_sq(p.m));
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw std::domain_error("scaled matrix product lost normalisation");
  }
  p.m.a /= f;
  p.m.b /= f;
  p.m.c /= f;
  p.m.d /= f;
  p.log_scale += std::log(f);
}

inline void push(ScaledMatrix& p, const Matrix& step) {
  p.m = mul(p.m, step);
  normalize(p);
  if (++p.pushes % 64 == 0 && p.log_scale < 2.0) {
    // Rescale so the represented product has determinant exactly 1. The
    // measured det(m) is trustworthy only while the product is shallow; in
    // the expanding regime det(m) cancels below double precision and the
    // analytic determinant handles it instead.
    double c = det(p.m) * std::exp(2.0 * p.log_scale);
    if (c > 0.0 && std::isfinite(c)) {
      double f = std::sqrt(c);
      p.m.a /= f;
      p.m.b /= f;
      p.m.c /= f;
      p.m.d /= f;
      normalize(p);
    }
  }
}

inline ScaledMatrix scaled(const Matrix& m) {
  ScaledMatrix p;
  p.m = m;
  p.log_scale = 0.0;
  normalize(p);
  return p;
}

inline ScaledMatrix mul(const ScaledMatrix& x, const ScaledMatrix& y) {
  ScaledMatrix p;
  p.m = mul(x.m, y.m);
  p.log_scale = x.log_scale + y.log_scale;
  normalize(p);
  return p;
}

inline ScaledMatrix inverse(const ScaledMatrix& p) {
  // For a true determinant-1 product e^L m, the inverse is e^L adj(m).
  ScaledMatrix q;
  q.m = Matrix{p.m.d, -p.m.b, -p.m.c, p.m.a};
  q.log_scale = p.log_scale;
  normalize(q);
  return q;
}

/// 2 ln || e^L m || with the singular values of m recovered from the unit
/// Frobenius norm and the analytic determinant.
inline double displacement(const ScaledMatrix& p) {
  double dt = analytic_det(p);
  double disc = std::max(1.0 - 4.0 * dt * dt, 0.0);
  return 2.0 * p.log_scale + std::log(0.5 * (1.0 + std::sqrt(disc)));
}

inline Point act(const ScaledMatrix& p, const Point& z) {
  double cr = p.m.c * z.re + p.m.d;
  double ci = p.m.c * z.im;
  double den = cr * cr + ci * ci;
  if (den == 0.0) throw std::domain_error("moebius image of interior point degenerated");
  double ar = p.m.a * z.re + p.m.b;
  double ai = p.m.a * z.im;
  double im = analytic_det(p) * z.im / den;
  if (!(im > 0.0)) im = std::numeric_limits<double>::min();
  return Point{(ar * cr + ai * ci) / den, im};
}

/// The boundary direction a long expanding product converges to: the image of
/// the top right-singular vector, i.e. the top eigenvector of m m^T. Diagonal
/// products return the point at infinity exactly.
inline Boundary top_direction(const ScaledMatrix& p) {
  const Matrix& m = p.m;
  double pp = m.a * m.a + m.b * m.b;
  double qq = m.a * m.c + m.b * m.d;
  double rr = m.c * m.c + m.d * m.d;
  double u1, u2;
  if (qq == 0.0) {
    if (pp >= rr) {
      u1 = 1.0;
      u2 = 0.0;
    } else {
      u1 = 0.0;
      u2 = 1.0;
    }
  } else {
    double lambda = 0.5 * (pp + rr + std::hypot(pp - rr, 2.0 * qq));
    // Pick the better-conditioned eigenvector formula.
    if (std::abs(lambda - rr) >= std::abs(lambda - pp)) {
      u1 = lambda - rr;
      u2 = qq;
    } else {
      u1 = qq;
      u2 = lambda - pp;
    }
  }
  if (u2 == 0.0) return Boundary::infinity();
  return Boundary::at(u1 / u2);
}

inline Matrix basepoint_frame(const Point& z) {
  double s = std::sqrt(z.im);
  return Matrix{s, z.re / s, 0.0, 1.0 / s};
}

/// d(P z0, z0) computed by conjugating into the frame of z0, where the
/// displacement is the log of the largest singular value squared.
inline double displacement_at(const ScaledMatrix& p, const Point& z0) {
  if (z0.re == 0.0 && z0.im == 1.0) return displacement(p);
  Matrix frame = basepoint_frame(z0);
  ScaledMatrix q = p;
  q.m = mul(mul(inverse(frame), p.m), frame);
  q.log_scale = p.log_scale;
  normalize(q);
  return displacement(q);
}

/// Horofunction normalised at `base`: for a finite boundary point
/// h(z) = ln(|z - xi|^2 / im_z) - ln(|base - xi|^2 / im_base), and at infinity
/// h(z) = ln(im_base / im_z). These are the Busemann limits of
/// d(z, w) - d(w, base) as w tends to the boundary point.
inline double busemann(const Boundary& xi, const Point& z, const Point& base) {
  if (xi.infinite) return std::log(base.im / z.im);
  double nz = (z.re - xi.xi) * (z.re - xi.xi) + z.im * z.im;
  double nb = (base.re - xi.xi) * (base.re - xi.xi) + base.im * base.im;
  return std::log(nz / z.im) - std::log(nb / base.im);
}

/// Gromov product of two boundary points as seen from `base`, the limit of
/// the interior products: ln(|xi - base| |eta - base| / (|xi - eta| im_base)).
inline double gromov_boundary_pair(const Boundary& xi, const Boundary& eta, const Point& base) {
  if (equal(xi, eta)) return std::numeric_limits<double>::infinity();
  if (xi.infinite || eta.infinite) {
    const Boundary& fin = xi.infinite ? eta : xi;
    return 0.5 * std::log(((base.re - fin.xi) * (base.re - fin.xi) + base.im * base.im) /
                          (base.im * base.im));
  }
  double nx = (base.re - xi.xi) * (base.re - xi.xi) + base.im * base.im;
  double ne = (base.re - eta.xi) * (base.re - eta.xi) + base.im * base.im;
  double d2 = (xi.xi - eta.xi) * (xi.xi - eta.xi);
  return 0.5 * std::log(nx * ne / (d2 * base.im * base.im));
}

inline double gromov_to_boundary(const Point& z, const Boundary& eta, const Point& base) {
  return 0.5 * (distance(z, base) - busemann(eta, z, base));
}

}  // namespace hyperdrift::h2
