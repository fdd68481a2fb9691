#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "hyperdrift/geometry.hpp"
#include "hyperdrift/markov.hpp"
#include "hyperdrift/models.hpp"
#include "hyperdrift/rng.hpp"

namespace hyperdrift {

/// Steps drawn independently each time from a finite isometry set.
template <class S>
struct IidDriver {
  std::vector<typename S::Isometry> steps;
  std::vector<double> probs;
};

/// Steps indexed by the transitions of a finite Markov chain: the step taken
/// between states w1 -> w2 is table[w1 * m + w2].
template <class S>
struct MarkovDriver {
  MarkovKernel kernel;
  std::vector<double> initial;
  std::vector<typename S::Isometry> table;
};

template <class S>
struct Cocycle {
  S space;
  std::variant<IidDriver<S>, MarkovDriver<S>> driver;
};

template <class S>
Cocycle<S> make_iid_cocycle(S space, std::vector<typename S::Isometry> steps,
                            std::vector<double> probs) {
  if (steps.empty() || steps.size() != probs.size()) {
    throw std::invalid_argument("iid driver needs one probability per isometry");
  }
  check_distribution(probs, "iid step distribution");
  return Cocycle<S>{std::move(space), IidDriver<S>{std::move(steps), std::move(probs)}};
}

template <class S>
Cocycle<S> make_markov_cocycle(S space, MarkovKernel kernel, std::vector<double> initial,
                               std::vector<typename S::Isometry> table) {
  check_kernel(kernel);
  check_distribution(initial, "initial distribution");
  std::size_t m = static_cast<std::size_t>(kernel.size());
  if (initial.size() != m) throw std::invalid_argument("initial distribution size mismatch");
  if (table.size() != m * m) {
    throw std::invalid_argument("markov driver needs one isometry per (state, state) pair");
  }
  return Cocycle<S>{std::move(space),
                    MarkovDriver<S>{std::move(kernel), std::move(initial), std::move(table)}};
}

template <class S>
int state_count(const Cocycle<S>& c) {
  if (c.driver.index() == 0) return static_cast<int>(std::get<0>(c.driver).steps.size());
  return std::get<1>(c.driver).kernel.size();
}

template <class S>
const std::vector<double>& initial_distribution(const Cocycle<S>& c) {
  if (c.driver.index() == 0) return std::get<0>(c.driver).probs;
  return std::get<1>(c.driver).initial;
}

template <class S>
const std::vector<double>& transition_row(const Cocycle<S>& c, int state) {
  if (c.driver.index() == 0) return std::get<0>(c.driver).probs;
  return std::get<1>(c.driver).kernel.rows[static_cast<std::size_t>(state)];
}

template <class S>
const typename S::Isometry& step_isometry(const Cocycle<S>& c, int from, int to) {
  if (c.driver.index() == 0) return std::get<0>(c.driver).steps[static_cast<std::size_t>(to)];
  const auto& d = std::get<1>(c.driver);
  return d.table[static_cast<std::size_t>(from) * static_cast<std::size_t>(d.kernel.size()) +
                 static_cast<std::size_t>(to)];
}

/// Step table as a flat span: iid tables have one entry per state, Markov
/// tables one per transition. Shared index set is what dinf comparisons need.
template <class S>
std::span<const typename S::Isometry> step_table(const Cocycle<S>& c) {
  if (c.driver.index() == 0) return std::get<0>(c.driver).steps;
  return std::get<1>(c.driver).table;
}

template <class S>
std::span<typename S::Isometry> step_table(Cocycle<S>& c) {
  if (c.driver.index() == 0) return std::get<0>(c.driver).steps;
  return std::get<1>(c.driver).table;
}

/// Incremental walker for one driver realization: holds the current state,
/// the running product g^{(i)} and its substream rng.
template <class S>
struct PathStepper {
  const Cocycle<S>* cocycle = nullptr;
  CounterRng rng;
  int state = 0;
  typename S::Product product;
  int steps_taken = 0;

  PathStepper(const Cocycle<S>& c, std::uint64_t seed, std::uint64_t stream)
      : cocycle(&c), rng(seed, stream) {
    state = rng.next_discrete(initial_distribution(c));
    product = c.space.product_identity();
  }

  /// Draws the next state, pushes its step into the product, and returns the
  /// step isometry just taken.
  const typename S::Isometry& advance() {
    int next = rng.next_discrete(transition_row(*cocycle, state));
    const auto& step = step_isometry(*cocycle, state, next);
    cocycle->space.product_push(product, step);
    state = next;
    ++steps_taken;
    return step;
  }
};

template <class S>
struct PathSample {
  std::uint64_t seed = 0;
  std::vector<int> states;               // omega_0 .. omega_n
  std::vector<double> displacement_log;  // d(g^{(i)} x0, x0), i = 0 .. n
  typename S::Product product;           // g^{(n)} in log-scale form
};

/// Samples one driver path of n steps; fully determined by (seed, stream).
template <class S>
PathSample<S> sample_path(const Cocycle<S>& c, int n, std::uint64_t seed,
                          std::uint64_t stream = 0) {
  if (n < 1) throw std::invalid_argument("path needs at least one step");
  auto base = c.space.basepoint();
  PathStepper<S> walker(c, seed, stream);
  PathSample<S> out;
  out.seed = seed;
  out.states.reserve(static_cast<std::size_t>(n) + 1);
  out.displacement_log.reserve(static_cast<std::size_t>(n) + 1);
  out.states.push_back(walker.state);
  out.displacement_log.push_back(0.0);
  for (int i = 0; i < n; ++i) {
    walker.advance();
    out.states.push_back(walker.state);
    out.displacement_log.push_back(c.space.product_displacement(walker.product, base));
  }
  out.product = std::move(walker.product);
  return out;
}

/// Displacement of a single table isometry at the canonical basepoint.
template <class S>
double step_displacement(const S& space, const typename S::Isometry& g) {
  auto base = space.basepoint();
  return space.distance(space.act(g, base), base);
}

/// log_b of d_infty(g) = sup_w b^{d(g(w) x0, x0)}: the largest step
/// displacement over the finite table, measured in units of log b.
template <class S>
double dinf_cocycle_log(const Cocycle<S>& c, double b) {
  if (!(b > 1.0)) throw std::invalid_argument("visual parameter b must exceed 1");
  double max_disp = 0.0;
  for (const auto& g : step_table(c)) {
    max_disp = std::max(max_disp, step_displacement(c.space, g));
  }
  return max_disp;  // log_b(b^max_disp) measured in nats of displacement
}

template <class S>
double dinf_cocycle(const Cocycle<S>& c, double b) {
  return std::exp(dinf_cocycle_log(c, b) * std::log(b));
}

/// Net lower bound for the cocycle pseudometric d_infty(g1, g2): the worst
/// group-distance lower bound across the shared step table.
template <class S>
double dinf_distance(const GeometryContext<S>& ctx, const Cocycle<S>& c1, const Cocycle<S>& c2,
                     std::span<const ExtPoint<S>> net) {
  if (c1.driver.index() != c2.driver.index() || state_count(c1) != state_count(c2)) {
    throw std::invalid_argument("cocycles do not share a driver index set");
  }
  auto t1 = step_table(c1);
  auto t2 = step_table(c2);
  double worst = 0.0;
  for (std::size_t i = 0; i < t1.size(); ++i) {
    worst = std::max(worst, group_distance_lower<S>(ctx, t1[i], t2[i], net));
  }
  return worst;
}

/// Checks that two cocycles ride the same driver realization: same kind,
/// same transition probabilities. Coupled experiments require this.
template <class S>
void check_shared_driver(const Cocycle<S>& c1, const Cocycle<S>& c2) {
  if (c1.driver.index() != c2.driver.index() || state_count(c1) != state_count(c2)) {
    throw std::invalid_argument("cocycles do not share a driver");
  }
  int m = state_count(c1);
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > 1e-12) return false;
    }
    return true;
  };
  if (!close(initial_distribution(c1), initial_distribution(c2))) {
    throw std::invalid_argument("cocycles do not share a driver");
  }
  for (int s = 0; s < m; ++s) {
    if (!close(transition_row(c1, s), transition_row(c2, s))) {
      throw std::invalid_argument("cocycles do not share a driver");
    }
  }
}

}  // namespace hyperdrift
