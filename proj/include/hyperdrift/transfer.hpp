#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "hyperdrift/geometry.hpp"
#include "hyperdrift/markov.hpp"
#include "hyperdrift/models.hpp"
#include "hyperdrift/rng.hpp"

namespace hyperdrift {

/// Complex-valued function on (state, boundary cell) pairs, stored state-major.
struct GridFunction {
  int states = 0;
  int cells = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& at(int state, int cell) {
    return values[static_cast<std::size_t>(state) * static_cast<std::size_t>(cells) +
                  static_cast<std::size_t>(cell)];
  }
  const std::complex<double>& at(int state, int cell) const {
    return values[static_cast<std::size_t>(state) * static_cast<std::size_t>(cells) +
                  static_cast<std::size_t>(cell)];
  }
};

inline GridFunction make_grid_function(int states, int cells) {
  if (states < 1 || cells < 1) throw std::invalid_argument("grid needs states and cells");
  GridFunction f;
  f.states = states;
  f.cells = cells;
  f.values.assign(static_cast<std::size_t>(states) * static_cast<std::size_t>(cells), {0.0, 0.0});
  return f;
}

/// A finite observed system: Markov kernel, its stationary measure, the
/// transition-indexed isometries, and the boundary discretization the
/// operators act on. resolution is the boundary_net argument that produced
/// the net (tree: prefix depth; plane: cell count).
template <class S>
struct ObservedSystem {
  GeometryContext<S> ctx;
  MarkovKernel kernel;
  StationaryMeasure mu;
  std::vector<typename S::Isometry> table;  // (state, state) row-major
  std::vector<typename S::Boundary> net;
  int resolution = 0;
  double holder_radius = 1.0;

  int states() const { return kernel.size(); }
  int cells() const { return static_cast<int>(net.size()); }
  const typename S::Isometry& step(int from, int to) const {
    return table[static_cast<std::size_t>(from) * static_cast<std::size_t>(kernel.size()) +
                 static_cast<std::size_t>(to)];
  }
};

namespace detail {

/// Nearest net cell of a boundary point. The tree net partitions ends by
/// their first `resolution` letters; the circle net is uniform in the angle
/// 2 atan2(1, -x) that inverts the net parameterization.
template <class S>
int snap_cell(const S& space, const std::vector<typename S::Boundary>& net, int resolution,
              const typename S::Boundary& p) {
  if constexpr (std::is_same_v<S, UpperHalfPlane>) {
    (void)space;
    int cells = static_cast<int>(net.size());
    if (p.infinite) return 0;
    double theta = 2.0 * std::atan2(1.0, -p.xi);
    long j = std::lround(theta * static_cast<double>(cells) / (2.0 * std::numbers::pi));
    return static_cast<int>(((j % cells) + cells) % cells);
  } else {
    (void)space;
    std::size_t depth = static_cast<std::size_t>(resolution);
    for (std::size_t j = 0; j < net.size(); ++j) {
      bool match = true;
      std::size_t limit = std::min(depth, fg::known_depth(p));
      for (std::size_t i = 0; i < limit; ++i) {
        if (fg::stream_letter(p, i) != fg::stream_letter(net[j], i)) {
          match = false;
          break;
        }
      }
      if (match) return static_cast<int>(j);
    }
    throw std::runtime_error("boundary point escapes the net");
  }
}

}  // namespace detail

template <class S>
int snap(const ObservedSystem<S>& sys, const typename S::Boundary& p) {
  return detail::snap_cell(sys.ctx.space, sys.net, sys.resolution, p);
}

template <class S>
ObservedSystem<S> make_observed_system(const GeometryContext<S>& ctx, MarkovKernel kernel,
                                       std::vector<typename S::Isometry> table, int resolution,
                                       double holder_radius = 1.0) {
  check_kernel(kernel);
  std::size_t m = static_cast<std::size_t>(kernel.size());
  if (table.size() != m * m) {
    throw std::invalid_argument("observed system needs one isometry per (state, state) pair");
  }
  if (!(holder_radius > 0.0)) throw std::invalid_argument("holder radius must be positive");
  ObservedSystem<S> sys;
  sys.ctx = ctx;
  sys.mu = stationary_measure(kernel);
  sys.kernel = std::move(kernel);
  sys.table = std::move(table);
  sys.net = ctx.space.boundary_net(resolution);
  sys.resolution = resolution;
  sys.holder_radius = holder_radius;
  return sys;
}

/// Upper bound for the snap displacement: how far (in the visual metric) a
/// boundary point can sit from the representative it snaps to. Exact on the
/// tree; on the circle, measured at the midpoints between neighbours.
template <class S>
double snap_mesh(const ObservedSystem<S>& sys) {
  if constexpr (std::is_same_v<S, UpperHalfPlane>) {
    int cells = sys.cells();
    double worst = 0.0;
    for (int j = 0; j < cells; ++j) {
      double theta = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.5) /
                     static_cast<double>(cells);
      typename S::Boundary mid = S::Boundary::at(-1.0 / std::tan(0.5 * theta));
      worst = std::max(worst, visual_metric(sys.ctx, at_boundary<S>(sys.net[static_cast<std::size_t>(j)]),
                                            at_boundary<S>(mid)));
    }
    return worst;
  } else {
    return std::pow(sys.ctx.b, -static_cast<double>(sys.resolution));
  }
}

/// Smallest visual distance between distinct cell representatives.
template <class S>
double min_cell_separation(const ObservedSystem<S>& sys) {
  double best = 1.0;
  for (std::size_t i = 0; i < sys.net.size(); ++i) {
    for (std::size_t j = i + 1; j < sys.net.size(); ++j) {
      best = std::min(best, visual_metric(sys.ctx, at_boundary<S>(sys.net[i]),
                                          at_boundary<S>(sys.net[j])));
    }
  }
  return best;
}

/// One application of the Laplace-Markov operator:
/// (Q_z f)(w1, xi) = sum_{w2} f(w2, snap(g^{-1} xi)) b^(z h_xi(g x0)) K(w1, w2)
/// with g the step isometry of (w1, w2). z = 0 is the skew Markov operator.
template <class S>
GridFunction laplace_markov_apply(const ObservedSystem<S>& sys, std::complex<double> z,
                                  const GridFunction& f) {
  if (f.states != sys.states() || f.cells != sys.cells()) {
    throw std::invalid_argument("grid function does not match the system grid");
  }
  if (std::abs(z.real()) > sys.holder_radius) {
    throw std::domain_error("Laplace parameter outside the allowed strip");
  }
  GridFunction out = make_grid_function(f.states, f.cells);
  int m = sys.states();
  int cells = sys.cells();
  const auto& space = sys.ctx.space;
  for (int w1 = 0; w1 < m; ++w1) {
    const auto& row = sys.kernel.rows[static_cast<std::size_t>(w1)];
    for (int w2 = 0; w2 < m; ++w2) {
      double k = row[static_cast<std::size_t>(w2)];
      if (k <= 0.0) continue;
      const auto& g = sys.step(w1, w2);
      auto ginv = space.inverse(g);
      auto moved = space.act(g, sys.ctx.basepoint);
      for (int i = 0; i < cells; ++i) {
        const auto& xi = sys.net[static_cast<std::size_t>(i)];
        int target = detail::snap_cell(space, sys.net, sys.resolution, space.act(ginv, xi));
        std::complex<double> weight =
            std::exp(z * (horofunction_eval(sys.ctx, xi, moved) * sys.ctx.log_b));
        out.at(w1, i) += f.at(w2, target) * weight * k;
      }
    }
  }
  return out;
}

/// Boundary Hoelder seminorm on the grid: worst difference quotient
/// |f(w,xi) - f(w,eta)| / D(xi,eta)^alpha over states and distinct cells.
template <class S>
double holder_seminorm(const ObservedSystem<S>& sys, const GridFunction& f, double alpha) {
  if (f.states != sys.states() || f.cells != sys.cells()) {
    throw std::invalid_argument("grid function does not match the system grid");
  }
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("holder exponent must lie in [0,1]");
  double worst = 0.0;
  for (int i = 0; i < f.cells; ++i) {
    for (int j = i + 1; j < f.cells; ++j) {
      double gap = std::pow(
          visual_metric(sys.ctx, at_boundary<S>(sys.net[static_cast<std::size_t>(i)]),
                        at_boundary<S>(sys.net[static_cast<std::size_t>(j)])),
          alpha);
      for (int w = 0; w < f.states; ++w) {
        worst = std::max(worst, std::abs(f.at(w, i) - f.at(w, j)) / gap);
      }
    }
  }
  return worst;
}

template <class S>
double holder_norm(const ObservedSystem<S>& sys, const GridFunction& f, double alpha) {
  double sup = 0.0;
  for (const auto& v : f.values) sup = std::max(sup, std::abs(v));
  return holder_seminorm(sys, f, alpha) + sup;
}

struct HolderConstEstimate {
  double value = 0.0;
  double std_error = 0.0;  // Monte-Carlo error of the maximizing entry
  int state = 0;
  int cell_a = 0;
  int cell_b = 0;
};

/// Average Hoelder constant at horizon n: the sup over start states and
/// distinct cell pairs of E[(D(g^{-(n)} xi, g^{-(n)} eta) / D(xi, eta))^alpha].
/// The ratio is evaluated through the horofunction identity
///   ratio = b^(-(h_xi(Z x0) + h_eta(Z x0)) / 2),  Z the forward product,
/// so no deep inverse ever enters the computation.
template <class S>
HolderConstEstimate avg_holder_const(const ObservedSystem<S>& sys, int n, double alpha,
                                     int samples, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("holder constant needs a horizon of at least 1");
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("holder exponent must lie in (0,1]");
  if (samples < 1) throw std::invalid_argument("holder constant needs at least one sample");
  int m = sys.states();
  int cells = sys.cells();
  std::size_t pairs = static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells - 1) / 2;
  const auto& space = sys.ctx.space;
  auto base = sys.ctx.basepoint;

  HolderConstEstimate best;
  best.value = -1.0;
  std::vector<double> sum(pairs), sumsq(pairs), weight(static_cast<std::size_t>(cells));
  for (int s = 0; s < m; ++s) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sumsq.begin(), sumsq.end(), 0.0);
    for (int k = 0; k < samples; ++k) {
      CounterRng rng(seed, static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(samples) +
                               static_cast<std::uint64_t>(k));
      int state = s;
      auto product = space.product_identity();
      for (int i = 0; i < n; ++i) {
        int next = rng.next_discrete(sys.kernel.rows[static_cast<std::size_t>(state)]);
        space.product_push(product, sys.step(state, next));
        state = next;
      }
      auto moved = space.product_point(product, base);
      for (int i = 0; i < cells; ++i) {
        double h = horofunction_eval(sys.ctx, sys.net[static_cast<std::size_t>(i)], moved);
        weight[static_cast<std::size_t>(i)] = std::exp(-0.5 * alpha * sys.ctx.log_b * h);
      }
      std::size_t p = 0;
      for (int i = 0; i < cells; ++i) {
        for (int j = i + 1; j < cells; ++j, ++p) {
          double w = weight[static_cast<std::size_t>(i)] * weight[static_cast<std::size_t>(j)];
          sum[p] += w;
          sumsq[p] += w * w;
        }
      }
    }
    std::size_t p = 0;
    for (int i = 0; i < cells; ++i) {
      for (int j = i + 1; j < cells; ++j, ++p) {
        double mean = sum[p] / static_cast<double>(samples);
        if (mean > best.value) {
          best.value = mean;
          best.state = s;
          best.cell_a = i;
          best.cell_b = j;
          if (samples > 1) {
            double var = (sumsq[p] - static_cast<double>(samples) * mean * mean) /
                         static_cast<double>(samples - 1);
            best.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
          } else {
            best.std_error = 0.0;
          }
        }
      }
    }
  }
  return best;
}

enum class Reducibility { irreducible_evidence, reducible_witness, inconclusive };

struct IrreducibilityReport {
  Reducibility verdict = Reducibility::inconclusive;
  std::vector<int> witness;  // cell per state, filled for reducible_witness
  int seed_state = -1;
  int candidates_checked = 0;
  int resolution = 0;
  int refined_resolution = 0;
};

namespace detail {

/// Boundary fixed points of an isometry; empty when none exist in the model
/// (elliptic rotations) or the isometry is trivial on the tree.
template <class S>
std::vector<typename S::Boundary> boundary_fixed_points(const S& space,
                                                        const typename S::Isometry& g) {
  std::vector<typename S::Boundary> out;
  if constexpr (std::is_same_v<S, UpperHalfPlane>) {
    (void)space;
    if (g.c == 0.0) {
      out.push_back(S::Boundary::infinity());
      if (g.a != g.d) out.push_back(S::Boundary::at(g.b / (g.a - g.d)));
      return out;
    }
    double disc = (g.a + g.d) * (g.a + g.d) - 4.0;
    if (disc < 0.0) return out;
    double root = std::sqrt(disc);
    out.push_back(S::Boundary::at((g.a - g.d + root) / (2.0 * g.c)));
    if (root > 0.0) out.push_back(S::Boundary::at((g.a - g.d - root) / (2.0 * g.c)));
    return out;
  } else {
    (void)space;
    fg::Word u;
    u.rank = g.rank;
    fg::Word core = g;
    while (core.length() >= 2 &&
           core.letters.front() == static_cast<fg::Letter>(-core.letters.back())) {
      u.letters.push_back(core.letters.front());
      core.letters.erase(core.letters.begin());
      core.letters.pop_back();
    }
    if (core.empty()) return out;
    fg::Word empty = fg::Word::identity(g.rank);
    out.push_back(fg::act(u, fg::make_end(empty, fg::detail::primitive_root(core))));
    out.push_back(
        fg::act(u, fg::make_end(empty, fg::detail::primitive_root(fg::inverse(core)))));
    return out;
  }
}

/// Spreads a seed cell through the transition graph along the equivariance
/// constraint H(w2) = snap(g(w1,w2) H(w1)) and checks every positive edge.
template <class S>
std::optional<std::vector<int>> propagate_assignment(
    const ObservedSystem<S>& sys, const std::vector<typename S::Boundary>& net, int resolution,
    int seed_state, int seed_cell) {
  int m = sys.states();
  std::vector<int> H(static_cast<std::size_t>(m), -1);
  H[static_cast<std::size_t>(seed_state)] = seed_cell;
  std::vector<int> queue{seed_state};
  const auto& space = sys.ctx.space;
  while (!queue.empty()) {
    int s = queue.back();
    queue.pop_back();
    const auto& row = sys.kernel.rows[static_cast<std::size_t>(s)];
    for (int t = 0; t < m; ++t) {
      if (row[static_cast<std::size_t>(t)] <= 0.0) continue;
      auto image = space.act(sys.step(s, t), net[static_cast<std::size_t>(H[static_cast<std::size_t>(s)])]);
      int target = snap_cell(space, net, resolution, image);
      int& slot = H[static_cast<std::size_t>(t)];
      if (slot == -1) {
        slot = target;
        queue.push_back(t);
      } else if (slot != target) {
        return std::nullopt;
      }
    }
  }
  for (int s = 0; s < m; ++s) {
    if (H[static_cast<std::size_t>(s)] == -1) return std::nullopt;
    const auto& row = sys.kernel.rows[static_cast<std::size_t>(s)];
    for (int t = 0; t < m; ++t) {
      if (row[static_cast<std::size_t>(t)] <= 0.0) continue;
      auto image = space.act(sys.step(s, t), net[static_cast<std::size_t>(H[static_cast<std::size_t>(s)])]);
      if (snap_cell(space, net, resolution, image) != H[static_cast<std::size_t>(t)]) {
        return std::nullopt;
      }
    }
  }
  return H;
}

}  // namespace detail

/// Searches for an equivariant boundary assignment (a reducibility witness).
/// Candidate seeds are the fixed points of short return words plus every
/// cell at state 0; a coarse hit must survive re-propagation on a refined
/// net to count as a witness. The three-valued verdict never overclaims:
/// exhaustion is evidence of irreducibility at this resolution only.
template <class S>
IrreducibilityReport irreducibility_heuristic(const ObservedSystem<S>& sys,
                                              int max_cycle_len = 3) {
  if (max_cycle_len < 1) throw std::invalid_argument("cycle search needs positive length");
  IrreducibilityReport report;
  report.resolution = sys.resolution;
  int m = sys.states();
  int count = 0;
  detail::scc_components(sys.kernel, count);
  if (count != 1) return report;  // disconnected chain: nothing to certify

  if constexpr (std::is_same_v<S, UpperHalfPlane>) {
    report.refined_resolution = 2 * sys.resolution;
  } else {
    report.refined_resolution = std::min(2 * sys.resolution, sys.resolution + 2);
  }
  auto refined_net = sys.ctx.space.boundary_net(report.refined_resolution);

  const auto& space = sys.ctx.space;
  typename S::Isometry ident{};
  if constexpr (!std::is_same_v<S, UpperHalfPlane>) ident = fg::Word::identity(space.rank);
  // Candidate seeds: (state, exact boundary point), fixed points first.
  std::vector<std::pair<int, typename S::Boundary>> seeds;
  for (int s = 0; s < m; ++s) {
    std::vector<std::pair<int, typename S::Isometry>> frontier{{s, ident}};
    for (int len = 1; len <= max_cycle_len; ++len) {
      std::vector<std::pair<int, typename S::Isometry>> next;
      for (const auto& [at, prod] : frontier) {
        const auto& row = sys.kernel.rows[static_cast<std::size_t>(at)];
        for (int t = 0; t < m; ++t) {
          if (row[static_cast<std::size_t>(t)] <= 0.0) continue;
          auto extended = space.compose(sys.step(at, t), prod);
          if (t == s) {
            for (auto& fp : detail::boundary_fixed_points(space, extended)) {
              seeds.emplace_back(s, std::move(fp));
            }
          }
          next.emplace_back(t, std::move(extended));
        }
      }
      frontier = std::move(next);
    }
  }
  for (const auto& cell : sys.net) seeds.emplace_back(0, cell);

  bool coarse_hit = false;
  std::vector<char> tried(static_cast<std::size_t>(m) * sys.net.size(), 0);
  for (const auto& [state, point] : seeds) {
    int cell = snap(sys, point);
    char& mark = tried[static_cast<std::size_t>(state) * sys.net.size() +
                       static_cast<std::size_t>(cell)];
    if (mark) continue;
    mark = 1;
    ++report.candidates_checked;
    auto coarse = detail::propagate_assignment(sys, sys.net, sys.resolution, state, cell);
    if (!coarse) continue;
    coarse_hit = true;
    int refined_cell = detail::snap_cell(space, refined_net, report.refined_resolution, point);
    auto fine =
        detail::propagate_assignment(sys, refined_net, report.refined_resolution, state, refined_cell);
    if (fine) {
      report.verdict = Reducibility::reducible_witness;
      report.witness = *coarse;
      report.seed_state = state;
      return report;
    }
  }
  report.verdict = coarse_hit ? Reducibility::inconclusive : Reducibility::irreducible_evidence;
  return report;
}

}  // namespace hyperdrift
