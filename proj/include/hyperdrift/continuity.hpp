#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "hyperdrift/cocycle.hpp"
#include "hyperdrift/drift.hpp"
#include "hyperdrift/geometry.hpp"
#include "hyperdrift/parallel.hpp"
#include "hyperdrift/rng.hpp"

namespace hyperdrift {

/// A one-parameter family of neighbours of a cocycle. On the plane every
/// table entry picks up a rotation by the scale; on the tree a scale-fraction
/// of the entries is nudged by a generator. Scale 0 returns the cocycle as is.
template <class S>
Cocycle<S> perturbed_cocycle(const Cocycle<S>& c, double scale) {
  if (scale < 0.0) throw std::invalid_argument("perturbation scale must be nonnegative");
  Cocycle<S> out = c;
  if (scale == 0.0) return out;
  auto table = step_table(out);
  if constexpr (std::is_same_v<S, UpperHalfPlane>) {
    h2::Matrix spin{std::cos(scale), std::sin(scale), -std::sin(scale), std::cos(scale)};
    for (auto& g : table) g = out.space.compose(g, spin);
  } else {
    fg::Word nudge;
    nudge.rank = out.space.rank;
    nudge.letters.push_back(1);
    std::size_t touched = static_cast<std::size_t>(
        std::ceil(std::min(scale, 1.0) * static_cast<double>(table.size())));
    for (std::size_t i = 0; i < touched; ++i) table[i] = out.space.compose(table[i], nudge);
  }
  return out;
}

struct ContinuityRow {
  double scale = 0.0;
  double dinf_proxy = 0.0;      // net lower bound for the table distance
  double drift_diff = 0.0;      // |mean difference| of coupled estimates
  double max_abs_diff = 0.0;    // worst single coupled sample
  double bound_constant = 0.0;  // the a-priori constant inside prop_bound
  double prop_bound = 0.0;      // finite-scale continuity bound at this row
  std::vector<double> per_sample_diff;
};

struct ContinuityReport {
  int n = 0;
  int samples = 0;
  std::vector<ContinuityRow> rows;
};

/// Coupled perturbation experiment: every row reruns the same driver
/// realizations (streams 0..samples-1) through the base table and the
/// perturbed table, so differences are per-path and the finite-scale bound
/// prop_bound = C^n / log(b) * proxy applies sample-wise. The constant folds
/// the horizon-counting factor n into an extra power, so it is a-priori in n.
template <class S>
ContinuityReport continuity_experiment(const GeometryContext<S>& ctx, const Cocycle<S>& c,
                                       std::span<const double> scales, int n, int samples,
                                       std::uint64_t seed, int threads,
                                       std::span<const ExtPoint<S>> net) {
  if (n < 1) throw std::invalid_argument("continuity horizon must be at least 1");
  if (samples < 1) throw std::invalid_argument("continuity needs at least one sample");
  if (scales.empty()) throw std::invalid_argument("continuity needs at least one scale");

  ContinuityReport report;
  report.n = n;
  report.samples = samples;
  double base_dinf = dinf_cocycle(c, ctx.b);
  std::vector<double> base_values = drift_samples(c, n, samples, seed, threads);

  for (double scale : scales) {
    Cocycle<S> moved = perturbed_cocycle(c, scale);
    ContinuityRow row;
    row.scale = scale;
    row.dinf_proxy = dinf_distance(ctx, c, moved, net);

    std::vector<double> diffs(static_cast<std::size_t>(samples));
    parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
      PathStepper<S> walker(c, seed, i);
      typename S::Product shadow = moved.space.product_identity();
      for (int k = 0; k < n; ++k) {
        int prev = walker.state;
        walker.advance();
        moved.space.product_push(shadow, step_isometry(moved, prev, walker.state));
      }
      double moved_value =
          moved.space.product_displacement(shadow, ctx.basepoint) / static_cast<double>(n);
      diffs[i] = base_values[i] - moved_value;
    });

    double sum = 0.0;
    for (double d : diffs) {
      sum += d;
      row.max_abs_diff = std::max(row.max_abs_diff, std::abs(d));
    }
    row.drift_diff = std::abs(sum / static_cast<double>(samples));

    double c0 = std::max(base_dinf, dinf_cocycle(moved, ctx.b));
    row.bound_constant = 1.5 * c0 * c0;
    row.prop_bound = row.dinf_proxy > 0.0
                         ? std::pow(row.bound_constant, static_cast<double>(n)) / ctx.log_b *
                               row.dinf_proxy
                         : 0.0;
    row.per_sample_diff = std::move(diffs);
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Least-squares slope of log(y) against log(x) over the strictly positive
/// pairs. This is the empirical Hoelder exponent when x holds scales and y
/// holds drift differences.
inline double fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("slope fit needs paired data");
  double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  int kept = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
    double lx = std::log(xs[i]);
    double ly = std::log(ys[i]);
    sx += lx;
    sxx += lx * lx;
    sy += ly;
    sxy += lx * ly;
    ++kept;
  }
  if (kept < 2) throw std::invalid_argument("slope fit needs two positive pairs");
  double det = kept * sxx - sx * sx;
  if (std::abs(det) <= 1e-14 * kept * sxx) {
    throw std::invalid_argument("slope fit is degenerate: scales coincide");
  }
  return (kept * sxy - sx * sy) / det;
}

inline double fit_loglog_slope(const ContinuityReport& report) {
  std::vector<double> xs, ys;
  for (const auto& row : report.rows) {
    xs.push_back(row.scale);
    ys.push_back(row.drift_diff);
  }
  return fit_loglog_slope(xs, ys);
}

struct SlopeInterval {
  double slope = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int resamples_used = 0;
};

/// Percentile bootstrap for the log-log slope: rows are resampled
/// independently (the coupled per-sample differences are the resampling
/// unit), degenerate resamples with too few positive rows are dropped.
inline SlopeInterval bootstrap_slope(const ContinuityReport& report, int resamples,
                                     std::uint64_t seed) {
  if (resamples < 10) throw std::invalid_argument("bootstrap needs a two-digit resample count");
  for (const auto& row : report.rows) {
    if (row.per_sample_diff.empty()) {
      throw std::invalid_argument("bootstrap needs the per-sample differences");
    }
  }
  SlopeInterval out;
  out.slope = fit_loglog_slope(report);
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < report.rows.size(); ++j) {
      const auto& diffs = report.rows[j].per_sample_diff;
      CounterRng rng(seed, (static_cast<std::uint64_t>(r) << 16) | j);
      double sum = 0.0;
      for (std::size_t i = 0; i < diffs.size(); ++i) {
        sum += diffs[static_cast<std::size_t>(rng.next_below(static_cast<int>(diffs.size())))];
      }
      xs.push_back(report.rows[j].scale);
      ys.push_back(std::abs(sum / static_cast<double>(diffs.size())));
    }
    try {
      slopes.push_back(fit_loglog_slope(xs, ys));
    } catch (const std::invalid_argument&) {
      // resample collapsed to fewer than two positive rows; skip it
    }
  }
  if (slopes.size() < 10) {
    throw std::runtime_error("bootstrap collapsed: too few usable resamples");
  }
  std::sort(slopes.begin(), slopes.end());
  out.resamples_used = static_cast<int>(slopes.size());
  auto at = [&](double q) {
    double pos = q * static_cast<double>(slopes.size() - 1);
    return slopes[static_cast<std::size_t>(pos + 0.5)];
  };
  out.lo = at(0.025);
  out.hi = at(0.975);
  return out;
}

}  // namespace hyperdrift
