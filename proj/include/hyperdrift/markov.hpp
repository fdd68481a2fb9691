#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hyperdrift/rng.hpp"

namespace hyperdrift {

/// Row-stochastic transition matrix on finitely many states.
struct MarkovKernel {
  std::vector<std::vector<double>> rows;

  int size() const { return static_cast<int>(rows.size()); }
};

inline void check_distribution(const std::vector<double>& probs, const char* what) {
  if (probs.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
  }
}

inline void check_kernel(const MarkovKernel& k) {
  if (k.rows.empty()) throw std::invalid_argument("markov kernel is empty");
  for (const auto& row : k.rows) {
    if (row.size() != k.rows.size()) throw std::invalid_argument("markov kernel is not square");
    check_distribution(row, "markov kernel row");
  }
}

inline MarkovKernel make_kernel(std::vector<std::vector<double>> rows) {
  MarkovKernel k{std::move(rows)};
  check_kernel(k);
  return k;
}

/// K^n by repeated row-stochastic multiplication.
inline MarkovKernel iterate_kernel(const MarkovKernel& k, int n) {
  if (n < 1) throw std::invalid_argument("kernel iteration count must be at least 1");
  int m = k.size();
  MarkovKernel out = k;
  for (int step = 1; step < n; ++step) {
    std::vector<std::vector<double>> next(static_cast<std::size_t>(m),
                                          std::vector<double>(static_cast<std::size_t>(m), 0.0));
    for (int i = 0; i < m; ++i) {
      for (int t = 0; t < m; ++t) {
        double w = out.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
        if (w == 0.0) continue;
        for (int j = 0; j < m; ++j) {
          next[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
              w * k.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        }
      }
    }
    out.rows = std::move(next);
  }
  return out;
}

namespace detail {

/// Strongly connected components of the positive-transition digraph, by
/// Kosaraju's two passes. Returns a component id per state.
inline std::vector<int> scc_components(const MarkovKernel& k, int& count) {
  int m = k.size();
  auto edge = [&](int a, int b) {
    return k.rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] > 0.0;
  };
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(m));
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  for (int start = 0; start < m; ++start) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    // Iterative post-order.
    std::vector<std::pair<int, int>> stack{{start, 0}};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      auto [v, next] = stack.back();
      bool pushed = false;
      while (next < m) {
        int w = next++;
        if (edge(v, w) && !seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          stack.back().second = next;
          stack.emplace_back(w, 0);
          pushed = true;
          break;
        }
      }
      if (!pushed) {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  std::vector<int> comp(static_cast<std::size_t>(m), -1);
  count = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[static_cast<std::size_t>(*it)] >= 0) continue;
    std::vector<int> stack{*it};
    comp[static_cast<std::size_t>(*it)] = count;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < m; ++w) {
        if (edge(w, v) && comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  return comp;
}

}  // namespace detail

/// The recurrent classes of the chain: components with no outgoing edge.
inline std::vector<std::vector<int>> recurrent_classes(const MarkovKernel& k) {
  int count = 0;
  auto comp = detail::scc_components(k, count);
  int m = k.size();
  std::vector<char> leaves(static_cast<std::size_t>(count), 1);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      if (k.rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] > 0.0 &&
          comp[static_cast<std::size_t>(a)] != comp[static_cast<std::size_t>(b)]) {
        leaves[static_cast<std::size_t>(comp[static_cast<std::size_t>(a)])] = 0;
      }
    }
  }
  std::vector<std::vector<int>> classes;
  for (int c = 0; c < count; ++c) {
    if (!leaves[static_cast<std::size_t>(c)]) continue;
    std::vector<int> members;
    for (int s = 0; s < m; ++s) {
      if (comp[static_cast<std::size_t>(s)] == c) members.push_back(s);
    }
    classes.push_back(std::move(members));
  }
  return classes;
}

struct StationaryMeasure {
  std::vector<double> weights;
  double residual = 0.0;
};

/// The unique stationary distribution, by lazy power iteration
/// pi <- (pi + pi K) / 2 from the uniform start (the lazy step tames
/// periodic chains). Requires a single recurrent class.
inline StationaryMeasure stationary_measure(const MarkovKernel& k) {
  check_kernel(k);
  auto classes = recurrent_classes(k);
  if (classes.size() != 1) {
    std::ostringstream msg;
    msg << "markov kernel has " << classes.size() << " recurrent classes:";
    for (const auto& cls : classes) {
      msg << " {";
      for (std::size_t i = 0; i < cls.size(); ++i) msg << (i ? "," : "") << cls[i];
      msg << "}";
    }
    throw std::invalid_argument(msg.str());
  }
  int m = k.size();
  std::vector<double> pi(static_cast<std::size_t>(m), 1.0 / m);
  std::vector<double> next(static_cast<std::size_t>(m));
  double residual = 0.0;
  for (long iter = 0; iter < 2000000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      double w = pi[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      for (int j = 0; j < m; ++j) {
        next[static_cast<std::size_t>(j)] +=
            w * k.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    residual = 0.0;
    for (int j = 0; j < m; ++j) {
      residual += std::abs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]);
      pi[static_cast<std::size_t>(j)] =
          0.5 * (pi[static_cast<std::size_t>(j)] + next[static_cast<std::size_t>(j)]);
    }
    if (residual < 1e-13) break;
  }
  if (residual >= 1e-13) {
    throw std::runtime_error("stationary measure iteration did not converge");
  }
  double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& w : pi) w /= total;
  // Reported residual is measured against the true kernel, not the lazy one.
  std::fill(next.begin(), next.end(), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      next[static_cast<std::size_t>(j)] +=
          pi[static_cast<std::size_t>(i)] *
          k.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  residual = 0.0;
  for (int j = 0; j < m; ++j) {
    residual += std::abs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]);
  }
  return StationaryMeasure{std::move(pi), residual};
}

/// A state path omega_0..omega_n of the Kolmogorov extension.
inline std::vector<int> kolmogorov_sample(const MarkovKernel& k, const std::vector<double>& mu0,
                                          int n, std::uint64_t seed, std::uint64_t stream = 0) {
  check_kernel(k);
  check_distribution(mu0, "initial distribution");
  if (mu0.size() != static_cast<std::size_t>(k.size())) {
    throw std::invalid_argument("initial distribution size does not match kernel");
  }
  if (n < 0) throw std::invalid_argument("path length must be nonnegative");
  CounterRng rng(seed, stream);
  std::vector<int> path;
  path.reserve(static_cast<std::size_t>(n) + 1);
  path.push_back(rng.next_discrete(mu0));
  for (int i = 0; i < n; ++i) {
    path.push_back(rng.next_discrete(k.rows[static_cast<std::size_t>(path.back())]));
  }
  return path;
}

/// One transition of averaging: (Q f)(i) = sum_j f(j) K(i, j).
inline std::vector<double> markov_operator_apply(const MarkovKernel& k,
                                                 const std::vector<double>& f) {
  if (f.size() != static_cast<std::size_t>(k.size())) {
    throw std::invalid_argument("function length does not match kernel");
  }
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = 0; j < f.size(); ++j) {
      out[i] += k.rows[i][j] * f[j];
    }
  }
  return out;
}

/// gcd of cycle lengths through state 0, via BFS levels on the transition
/// digraph. Only meaningful when the chain is a single strongly connected
/// component.
inline int chain_period(const MarkovKernel& k) {
  int m = k.size();
  std::vector<int> level(static_cast<std::size_t>(m), -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int v = queue[head];
    for (int w = 0; w < m; ++w) {
      if (k.rows[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] <= 0.0) continue;
      if (level[static_cast<std::size_t>(w)] < 0) {
        level[static_cast<std::size_t>(w)] = level[static_cast<std::size_t>(v)] + 1;
        queue.push_back(w);
      }
    }
  }
  int period = 0;
  for (int v = 0; v < m; ++v) {
    for (int w = 0; w < m; ++w) {
      if (k.rows[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] <= 0.0) continue;
      int diff = level[static_cast<std::size_t>(v)] + 1 - level[static_cast<std::size_t>(w)];
      period = std::gcd(period, std::abs(diff));
    }
  }
  return period == 0 ? 1 : period;
}

struct MixingReport {
  std::vector<double> errors;  // e_n = max_w |Q^n f(w) - mean|, n = 1..n_max
  double c = 0.0;              // smallest C with e_n <= C sigma^n on the data
  double sigma = 0.0;          // fitted geometric decay
};

/// Strong-mixing diagnostic: iterates the Markov operator on f and fits the
/// worst-case error against C sigma^n. Requires an irreducible aperiodic
/// chain (a periodic chain cannot decay).
inline MixingReport strong_mixing_diagnostic(const MarkovKernel& k, const std::vector<double>& f,
                                             int n_max) {
  if (n_max < 2) throw std::invalid_argument("mixing diagnostic needs n_max >= 2");
  int count = 0;
  auto comp = detail::scc_components(k, count);
  (void)comp;
  if (count != 1) throw std::invalid_argument("mixing diagnostic needs an irreducible chain");
  int period = chain_period(k);
  if (period > 1) {
    throw std::invalid_argument("chain is periodic with period " + std::to_string(period) +
                                "; no mixing decay");
  }
  auto mu = stationary_measure(k);
  double mean = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) mean += f[i] * mu.weights[i];

  MixingReport report;
  std::vector<double> current = f;
  for (int n = 1; n <= n_max; ++n) {
    current = markov_operator_apply(k, current);
    double err = 0.0;
    for (double v : current) err = std::max(err, std::abs(v - mean));
    report.errors.push_back(err);
  }

  // Least squares on ln e_n over the entries that are still above roundoff.
  double floor = 1e-14 * std::max(1.0, std::abs(mean));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int kept = 0;
  for (int n = 1; n <= n_max; ++n) {
    double e = report.errors[static_cast<std::size_t>(n - 1)];
    if (e <= floor) continue;
    double x = n, y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++kept;
  }
  if (kept < 2) return report;  // f was (numerically) invariant: C = sigma = 0
  double denom = kept * sxx - sx * sx;
  double slope = (kept * sxy - sx * sy) / denom;
  report.sigma = std::exp(slope);
  double log_c = -std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_max; ++n) {
    double e = report.errors[static_cast<std::size_t>(n - 1)];
    if (e <= floor) continue;
    log_c = std::max(log_c, std::log(e) - n * slope);
  }
  report.c = std::exp(log_c);
  return report;
}

}  // namespace hyperdrift
