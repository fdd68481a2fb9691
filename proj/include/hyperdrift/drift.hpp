#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hyperdrift/cocycle.hpp"
#include "hyperdrift/parallel.hpp"

namespace hyperdrift {

struct DriftEstimate {
  int n = 0;
  int samples = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> per_sample;  // filled only when the caller keeps samples
};

namespace detail {

inline DriftEstimate summarize_drift(int n, std::vector<double> values, bool keep) {
  DriftEstimate out;
  out.n = n;
  out.samples = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.samples);
  if (out.samples > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(out.samples - 1)) /
                    std::sqrt(static_cast<double>(out.samples));
  }
  if (keep) out.per_sample = std::move(values);
  return out;
}

}  // namespace detail

/// Per-sample normalized displacements (1/n) d(g^{(n)} x0, x0). Sample i runs
/// on substream stream_base + i, so estimates at different grid points or in
/// coupled experiments can reserve disjoint stream ranges.
template <class S>
std::vector<double> drift_samples(const Cocycle<S>& c, int n, int samples, std::uint64_t seed,
                                  int threads = 1, std::uint64_t stream_base = 0) {
  if (n < 1) throw std::invalid_argument("drift horizon must be at least 1");
  if (samples < 1) throw std::invalid_argument("drift needs at least one sample");
  std::vector<double> values(static_cast<std::size_t>(samples));
  auto base = c.space.basepoint();
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    PathStepper<S> walker(c, seed, stream_base + i);
    for (int k = 0; k < n; ++k) walker.advance();
    values[i] = c.space.product_displacement(walker.product, base) / static_cast<double>(n);
  });
  return values;
}

template <class S>
DriftEstimate finite_scale_drift(const Cocycle<S>& c, int n, int samples, std::uint64_t seed,
                                 int threads = 1, std::uint64_t stream_base = 0,
                                 bool keep_samples = false) {
  return detail::summarize_drift(n, drift_samples(c, n, samples, seed, threads, stream_base),
                                 keep_samples);
}

/// Exact finite-scale drift by exhausting every driver path of length n.
/// Only viable for tiny state counts and horizons; refuses past ~2e6 paths.
template <class S>
double finite_scale_drift_exact(const Cocycle<S>& c, int n) {
  if (n < 1) throw std::invalid_argument("drift horizon must be at least 1");
  int m = state_count(c);
  double path_count = std::pow(static_cast<double>(m), static_cast<double>(n) + 1.0);
  if (path_count > 2e6) {
    throw std::invalid_argument("exhaustive drift would enumerate too many paths");
  }
  auto base = c.space.basepoint();
  double acc = 0.0;
  // Depth-first over state paths, carrying the partial product and weight.
  auto descend = [&](auto&& self, int state, int depth, double weight,
                     const typename S::Product& product) -> void {
    if (depth == n) {
      acc += weight * c.space.product_displacement(product, base);
      return;
    }
    const auto& row = transition_row(c, state);
    for (int next = 0; next < m; ++next) {
      double p = row[static_cast<std::size_t>(next)];
      if (p <= 0.0) continue;
      auto extended = product;
      c.space.product_push(extended, step_isometry(c, state, next));
      self(self, next, depth + 1, weight * p, extended);
    }
  };
  const auto& initial = initial_distribution(c);
  for (int s = 0; s < m; ++s) {
    double p = initial[static_cast<std::size_t>(s)];
    if (p <= 0.0) continue;
    descend(descend, s, 0, p, c.space.product_identity());
  }
  return acc / static_cast<double>(n);
}

struct DriftFit {
  double drift = 0.0;
  double slope = 0.0;     // coefficient of the log(n)/n correction term
  double residual = 0.0;  // rms misfit of the two-parameter model
  bool degenerate = false;
  std::vector<DriftEstimate> grid;
};

/// Extrapolates the drift from a grid of horizons by fitting
/// mean_n = drift + slope * log(n)/n. A different logarithm base only
/// rescales the slope, never the extrapolated drift.
template <class S>
DriftFit drift_extrapolate(const Cocycle<S>& c, std::span<const int> n_grid, int samples,
                           std::uint64_t seed, int threads = 1) {
  if (n_grid.size() < 3) throw std::invalid_argument("drift fit needs at least three horizons");
  for (std::size_t j = 0; j + 1 < n_grid.size(); ++j) {
    if (n_grid[j] >= n_grid[j + 1]) {
      throw std::invalid_argument("drift fit horizons must be strictly increasing");
    }
  }
  DriftFit fit;
  fit.grid.reserve(n_grid.size());
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    std::uint64_t stream_base = static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(samples);
    fit.grid.push_back(finite_scale_drift(c, n_grid[j], samples, seed, threads, stream_base));
  }
  double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (const auto& row : fit.grid) {
    double x = std::log(static_cast<double>(row.n)) / static_cast<double>(row.n);
    sx += x;
    sxx += x * x;
    sy += row.mean;
    sxy += x * row.mean;
  }
  double m = static_cast<double>(fit.grid.size());
  double det = m * sxx - sx * sx;
  if (std::abs(det) <= 1e-14 * m * sxx + 1e-300) {
    fit.degenerate = true;
    fit.drift = fit.grid.back().mean;
    return fit;
  }
  fit.drift = (sxx * sy - sx * sxy) / det;
  fit.slope = (m * sxy - sx * sy) / det;
  double ss = 0.0;
  for (const auto& row : fit.grid) {
    double x = std::log(static_cast<double>(row.n)) / static_cast<double>(row.n);
    double r = row.mean - (fit.drift + fit.slope * x);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

struct TailReport {
  int n = 0;
  double epsilon = 0.0;
  int samples = 0;
  double center = 0.0;
  long tail_count = 0;
  double tail_prob = 0.0;
  double rate = 0.0;  // -(1/n) log_b tail_prob; +infinity when the count is 0
};

/// Empirical large-deviation tail P(|(1/n) d(g^{(n)} x0, x0) - center| > eps).
/// The center defaults to the same-run mean; pass the limiting drift to get
/// the limit-centered variant instead.
template <class S>
TailReport ld_tail(const Cocycle<S>& c, double b, int n, double epsilon, int samples,
                   std::uint64_t seed, int threads = 1,
                   std::optional<double> center_override = std::nullopt) {
  if (!(b > 1.0)) throw std::invalid_argument("visual parameter b must exceed 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("tail width must be positive");
  std::vector<double> values = drift_samples(c, n, samples, seed, threads);
  TailReport report;
  report.n = n;
  report.epsilon = epsilon;
  report.samples = samples;
  if (center_override) {
    report.center = *center_override;
  } else {
    double sum = 0.0;
    for (double v : values) sum += v;
    report.center = sum / static_cast<double>(samples);
  }
  for (double v : values) {
    if (std::abs(v - report.center) > epsilon) ++report.tail_count;
  }
  report.tail_prob = static_cast<double>(report.tail_count) / static_cast<double>(samples);
  if (report.tail_count == 0) {
    report.rate = std::numeric_limits<double>::infinity();
  } else {
    report.rate = -std::log(report.tail_prob) / (static_cast<double>(n) * std::log(b));
  }
  return report;
}

}  // namespace hyperdrift
