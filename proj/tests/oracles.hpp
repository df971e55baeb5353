#pragma once

// Test-only oracles. Everything here recomputes quantities through routes
// independent of the library code under test: fixed-point iteration instead
// of linear solves, truncated power sums instead of resolvent solves, and
// bisection on the erf-based normal CDF instead of a rational approximation.

#include "pms/mdp.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using pms::Matrix;
using pms::Policy;
using pms::TabularMdp;
using pms::Vector;

// Optimal Q by plain value iteration.
inline Matrix value_iteration_q(const TabularMdp& mdp, double tol = 1e-13, int max_iters = 1000000) {
  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int k = 0; k < max_iters; ++k) {
    Vector v(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) v(s) = q.row(s).maxCoeff();
    Matrix next(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        double acc = mdp.reward(s, a);
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          acc += mdp.gamma * mdp.transition[a](s, s2) * v(s2);
        }
        next(s, a) = acc;
      }
    }
    double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta <= tol) break;
  }
  return q;
}

// Q^pi by iterating the policy Bellman operator.
inline Matrix policy_q_iteration(const TabularMdp& mdp, const Policy& pi, double tol = 1e-13,
                                 int max_iters = 1000000) {
  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int k = 0; k < max_iters; ++k) {
    Vector v(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) v(s) = pi.probs.row(s).dot(q.row(s));
    Matrix next(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        double acc = mdp.reward(s, a);
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          acc += mdp.gamma * mdp.transition[a](s, s2) * v(s2);
        }
        next(s, a) = acc;
      }
    }
    double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta <= tol) break;
  }
  return q;
}

inline double policy_value(const TabularMdp& mdp, const Policy& pi) {
  Matrix q = policy_q_iteration(mdp, pi);
  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    total += mdp.init_dist(s) * pi.probs.row(s).dot(q.row(s));
  }
  return (1.0 - mdp.gamma) * total;
}

// State distribution after t steps under a policy, started from init_dist.
inline Vector state_dist_at(const TabularMdp& mdp, const Policy& pi, int t) {
  Vector d = mdp.init_dist;
  Matrix p = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    for (int s = 0; s < mdp.n_states; ++s) p.row(s) += pi.probs(s, a) * mdp.transition[a].row(s);
  }
  for (int k = 0; k < t; ++k) d = p.transpose() * d;
  return d;
}

// p_t(s, a) under a policy, started from init_dist.
inline Matrix step_occupancy(const TabularMdp& mdp, const Policy& pi, int t) {
  Vector d = state_dist_at(mdp, pi, t);
  Matrix occ(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) occ.row(s) = d(s) * pi.probs.row(s);
  return occ;
}

// Discounted visitation by brute-force truncated power sums.
inline Matrix discounted_visitation_power(const TabularMdp& mdp, const Policy& pi,
                                          double tail_tol = 1e-14) {
  Matrix total = Matrix::Zero(mdp.n_states, mdp.n_actions);
  double discount = 1.0;
  int t = 0;
  while (discount > tail_tol) {
    total += discount * step_occupancy(mdp, pi, t);
    discount *= mdp.gamma;
    ++t;
  }
  return (1.0 - mdp.gamma) * total;
}

inline Matrix average_occupancy_power(const TabularMdp& mdp, const Policy& b, int horizon) {
  Matrix total = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int t = 0; t < horizon; ++t) total += step_occupancy(mdp, b, t);
  return total / static_cast<double>(horizon);
}

inline Matrix ratio_power(const TabularMdp& mdp, const Policy& pi, const Policy& b, int horizon) {
  Matrix numer = discounted_visitation_power(mdp, pi);
  Matrix denom = average_occupancy_power(mdp, b, horizon);
  Matrix omega = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (denom(s, a) > 0.0) omega(s, a) = numer(s, a) / denom(s, a);
    }
  }
  return omega;
}

// Stationary state distribution by long power iteration on the Cesaro
// average (handles periodic unichains too).
inline Vector stationary_states_power(const TabularMdp& mdp, const Policy& pi, int iters = 200000) {
  Matrix p = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    for (int s = 0; s < mdp.n_states; ++s) p.row(s) += pi.probs(s, a) * mdp.transition[a].row(s);
  }
  Vector d = Vector::Constant(mdp.n_states, 1.0 / mdp.n_states);
  Vector avg = Vector::Zero(mdp.n_states);
  for (int k = 0; k < iters; ++k) {
    avg += d;
    d = p.transpose() * d;
  }
  avg /= static_cast<double>(iters);
  return avg / avg.sum();
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile_bisect(double p, double tol = 1e-12) {
  double lo = -40.0, hi = 40.0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
