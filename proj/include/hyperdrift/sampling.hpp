#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hyperdrift/free_group.hpp"
#include "hyperdrift/h2.hpp"
#include "hyperdrift/rng.hpp"

namespace hyperdrift::sampling {

inline fg::Word random_word(CounterRng& rng, int rank, int length) {
  std::vector<fg::Letter> letters;
  while (static_cast<int>(letters.size()) < length) {
    int g = rng.next_below(rank) + 1;
    auto l = static_cast<fg::Letter>(rng.next_below(2) == 0 ? g : -g);
    if (!letters.empty() && letters.back() == static_cast<fg::Letter>(-l)) continue;
    letters.push_back(l);
  }
  return fg::make_word(letters, rank);
}

inline fg::End random_end(CounterRng& rng, int rank, int depth) {
  fg::Word prefix = random_word(rng, rank, depth);
  fg::Word period;
  period.rank = rank;
  period.letters.push_back(prefix.letters.back());
  return fg::make_end(prefix, period);
}

inline h2::Matrix rotation(double theta) {
  return h2::Matrix{std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
}

inline h2::Matrix diagonal(double top) { return h2::Matrix{top, 0.0, 0.0, 1.0 / top}; }

inline h2::Matrix random_sl2(CounterRng& rng, double max_half_log) {
  double t = std::exp(rng.next_range(0.0, max_half_log));
  return h2::mul(h2::mul(rotation(rng.next_range(0.0, 2.0 * std::numbers::pi)), diagonal(t)),
                 rotation(rng.next_range(0.0, 2.0 * std::numbers::pi)));
}

inline h2::Point random_plane_point(CounterRng& rng) {
  return h2::Point{rng.next_range(-8.0, 8.0), std::exp(rng.next_range(-2.5, 2.5))};
}

inline h2::Boundary random_plane_boundary(CounterRng& rng) {
  if (rng.next_below(8) == 0) return h2::Boundary::infinity();
  double theta = rng.next_range(1e-6, 2.0 * std::numbers::pi);
  return h2::Boundary::at(-1.0 / std::tan(0.5 * theta));
}

/// A chain of orbit steps together with gap/angle parameters it is known to
/// satisfy: every step has reduced length >= gap and consecutive junctions
/// cancel at most `angle` letters, with compatibility gap > 2 angle.
struct TreeChain {
  std::vector<fg::Word> steps;
  double gap = 0.0;
  double angle = 0.0;
};

/// Builds an admissible tree chain by explicit junction bookkeeping: each new
/// step starts with the inverse of a chosen suffix of the previous step (the
/// exact Gromov product at that corner) and then continues cancellation-free.
inline TreeChain random_tree_chain(CounterRng& rng, int rank, int min_steps, int max_steps) {
  if (rank < 2 || min_steps < 2 || max_steps < min_steps) {
    throw std::invalid_argument("tree chain sampler needs rank >= 2 and 2 <= min <= max steps");
  }
  int rho = 3 + rng.next_below(6);
  int max_cancel = (rho - 1) / 2;
  int sigma = rng.next_below(max_cancel + 1);
  int n_steps = min_steps + rng.next_below(max_steps - min_steps + 1);

  TreeChain chain;
  chain.gap = rho;
  chain.angle = sigma;
  chain.steps.push_back(random_word(rng, rank, rho + sigma + rng.next_below(3)));
  for (int s = 1; s < n_steps; ++s) {
    const auto& prev = chain.steps.back().letters;
    int cancel = rng.next_below(sigma + 1);
    std::vector<fg::Letter> letters;
    for (int i = 0; i < cancel; ++i) {
      letters.push_back(static_cast<fg::Letter>(-prev[prev.size() - 1 - static_cast<std::size_t>(i)]));
    }
    // The first fresh letter must neither extend the junction cancellation
    // nor cancel inside the new step.
    auto junction_block = static_cast<fg::Letter>(
        -prev[prev.size() - 1 - static_cast<std::size_t>(cancel)]);
    int target = rho + sigma + rng.next_below(3);
    while (static_cast<int>(letters.size()) < target) {
      int g = rng.next_below(rank) + 1;
      auto l = static_cast<fg::Letter>(rng.next_below(2) == 0 ? g : -g);
      if (!letters.empty() && l == static_cast<fg::Letter>(-letters.back())) continue;
      if (static_cast<int>(letters.size()) == cancel && l == junction_block) continue;
      letters.push_back(l);
    }
    chain.steps.push_back(fg::make_word(letters, rank));
  }
  return chain;
}

/// SL2 chain with norm-gap mu and alignment nu read off the sampled matrices.
struct MatrixChain {
  std::vector<h2::Matrix> matrices;
  double mu = 0.0;
  double nu = 0.0;
};

/// Samples g_j = R(phi) diag(e^s, e^-s) R(psi) with the inter-step rotation
/// pinned near the axis, which keeps the alignment ratio away from zero and
/// the chain admissible for the matrix avalanche form.
inline MatrixChain random_matrix_chain(CounterRng& rng, int min_steps, int max_steps,
                                       double half_log_lo, double half_log_hi) {
  if (min_steps < 2 || max_steps < min_steps) {
    throw std::invalid_argument("matrix chain sampler needs 2 <= min <= max steps");
  }
  for (int attempt = 0; attempt < 64; ++attempt) {
    int n = min_steps + rng.next_below(max_steps - min_steps + 1);
    MatrixChain chain;
    double psi_prev = rng.next_range(0.0, 2.0 * std::numbers::pi);
    double phi = rng.next_range(0.0, 2.0 * std::numbers::pi);
    for (int j = 0; j < n; ++j) {
      double s = rng.next_range(half_log_lo, half_log_hi);
      double psi = (j == 0) ? psi_prev : rng.next_range(0.0, 2.0 * std::numbers::pi);
      if (j > 0) {
        double omega = rng.next_range(-std::numbers::pi / 5.0, std::numbers::pi / 5.0);
        phi = omega - psi_prev;
      }
      chain.matrices.push_back(
          h2::mul(h2::mul(rotation(phi), diagonal(std::exp(s))), rotation(psi)));
      psi_prev = psi;
    }
    chain.mu = std::numeric_limits<double>::infinity();
    chain.nu = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < chain.matrices.size(); ++j) {
      chain.mu = std::min(chain.mu, h2::op_norm_sq(chain.matrices[j]));
      if (j > 0) {
        double ratio = std::sqrt(h2::op_norm_sq(h2::mul(chain.matrices[j - 1], chain.matrices[j])) /
                                 (h2::op_norm_sq(chain.matrices[j - 1]) *
                                  h2::op_norm_sq(chain.matrices[j])));
        chain.nu = std::min(chain.nu, ratio);
      }
    }
    // Shave both bounds so the binding hypothesis holds strictly rather than
    // with equality, which would flip under 1-ulp evaluation differences.
    chain.mu *= 1.0 - 1e-9;
    chain.nu *= 1.0 - 1e-9;
    if (chain.nu > 1.0) chain.nu = 1.0;
    // Admissibility in log form: -2 ln nu < ln mu - 2 ln 2, with margin.
    if (-2.0 * std::log(chain.nu) < std::log(chain.mu) - 2.0 * std::numbers::ln2 - 1e-6) {
      return chain;
    }
  }
  throw std::runtime_error("matrix chain sampler failed to hit an admissible chain");
}

}  // namespace hyperdrift::sampling
