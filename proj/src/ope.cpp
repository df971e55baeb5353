#include "pms/ope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pms {

double RatioApprox::evaluate(int state, int action) const {
  double w = weights(features.active_index(state, action));
  return std::clamp(w, clip_min, clip_max);
}

RatioApprox fit_ratio(const std::vector<Transition>& data, const Policy& pi,
                      const TabularMdp& mdp, const FeatureMap& features, double gamma,
                      double lambda, double clip_min, double clip_max) {
  if (data.empty()) throw std::invalid_argument("fit_ratio needs a nonempty transition set");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(clip_min > 0.0) || clip_min > clip_max) {
    throw std::invalid_argument("need 0 < clip_min <= clip_max");
  }
  const int dim = features.dimension();

  Matrix system = Matrix::Zero(dim, dim);
  for (const Transition& tr : data) {
    int col = features.active_index(tr.state, tr.action);  // psi side
    system(col, col) += 1.0;
    for (int a2 = 0; a2 < mdp.n_actions; ++a2) {
      double p = pi.probs(tr.next_state, a2);
      if (p == 0.0) continue;
      system(features.active_index(tr.next_state, a2), col) -= gamma * p;
    }
  }
  system /= static_cast<double>(data.size());

  Vector rhs = Vector::Zero(dim);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.init_dist(s) == 0.0) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double p = pi.probs(s, a);
      if (p == 0.0) continue;
      rhs(features.active_index(s, a)) += (1.0 - gamma) * mdp.init_dist(s) * p;
    }
  }

  Vector beta;
  if (lambda == 0.0) {
    Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible()) {
      throw std::invalid_argument("ratio system is singular; set lambda > 0");
    }
    beta = lu.solve(rhs);
  } else {
    system.diagonal().array() += lambda;
    beta = system.partialPivLu().solve(rhs);
  }
  if (!beta.allFinite()) throw std::runtime_error("ratio solve produced non-finite weights");

  return {beta, features, clip_min, clip_max};
}

namespace {

// R + gamma sum_a' pi(a'|S') Q(S',a') - Q(S,A)
double td_residual(const QApprox& q, const Policy& pi, const Transition& tr, double gamma) {
  double next_value = 0.0;
  for (int a2 = 0; a2 < pi.probs.cols(); ++a2) {
    double p = pi.probs(tr.next_state, a2);
    if (p != 0.0) next_value += p * q.evaluate(tr.next_state, a2);
  }
  return tr.reward + gamma * next_value - q.evaluate(tr.state, tr.action);
}

double init_dist_term(const QApprox& q, const Policy& pi, const Vector& nu) {
  double total = 0.0;
  for (int s = 0; s < nu.size(); ++s) {
    if (nu(s) == 0.0) continue;
    double state_value = 0.0;
    for (int a = 0; a < pi.probs.cols(); ++a) {
      double p = pi.probs(s, a);
      if (p != 0.0) state_value += p * q.evaluate(s, a);
    }
    total += nu(s) * state_value;
  }
  return total;
}

}  // namespace

double dr_value_chunk(const QApprox& q, const Policy& pi, const RatioApprox& omega,
                      const std::vector<Transition>& chunk, const Vector& nu, double gamma) {
  if (chunk.empty()) throw std::invalid_argument("dr_value_chunk needs a nonempty chunk");
  double correction = 0.0;
  for (const Transition& tr : chunk) {
    correction += omega.evaluate(tr.state, tr.action) * td_residual(q, pi, tr, gamma);
  }
  correction /= static_cast<double>(chunk.size());
  return (1.0 - gamma) * init_dist_term(q, pi, nu) + correction;
}

SigmaEstimate dr_variance_chunk(const QApprox& q, const Policy& pi, const RatioApprox& omega,
                                const std::vector<Transition>& chunk, double gamma,
                                double sigma_floor) {
  if (chunk.empty()) throw std::invalid_argument("dr_variance_chunk needs a nonempty chunk");
  double second_moment = 0.0;
  for (const Transition& tr : chunk) {
    double term = omega.evaluate(tr.state, tr.action) * td_residual(q, pi, tr, gamma);
    second_moment += term * term;
  }
  second_moment /= static_cast<double>(chunk.size());
  SigmaEstimate est;
  est.sigma = std::sqrt(second_moment);
  if (est.sigma < sigma_floor) {
    est.sigma = sigma_floor;
    est.clamped = true;
  }
  return est;
}

double aggregate_value(const std::vector<ChunkEvaluation>& chunk_evals) {
  if (chunk_evals.empty()) throw std::invalid_argument("no chunk evaluations to aggregate");
  double weight_sum = 0.0, weighted = 0.0;
  for (const ChunkEvaluation& e : chunk_evals) {
    weight_sum += 1.0 / e.sigma;
    weighted += e.value / e.sigma;
  }
  return weighted / weight_sum;
}

double aggregate_sigma(const std::vector<ChunkEvaluation>& chunk_evals) {
  if (chunk_evals.empty()) throw std::invalid_argument("no chunk evaluations to aggregate");
  double inv_sum = 0.0;
  for (const ChunkEvaluation& e : chunk_evals) inv_sum += 1.0 / e.sigma;
  return static_cast<double>(chunk_evals.size()) / inv_sum;
}

double naive_greedy_score(const QApprox& q, const Policy& pi, const Vector& nu) {
  return init_dist_term(q, pi, nu);
}

double marginal_is_value(const RatioApprox& omega, const Dataset& data) {
  if (data.transitions.empty()) throw std::invalid_argument("marginal_is_value needs data");
  double total = 0.0;
  for (const Transition& tr : data.transitions) {
    total += omega.evaluate(tr.state, tr.action) * tr.reward;
  }
  return total / static_cast<double>(data.transitions.size());
}

double wis_value(const RatioApprox& omega, const Dataset& data) {
  if (data.transitions.empty()) throw std::invalid_argument("wis_value needs data");
  double weighted = 0.0, weight_sum = 0.0;
  for (const Transition& tr : data.transitions) {
    double w = omega.evaluate(tr.state, tr.action);
    weighted += w * tr.reward;
    weight_sum += w;
  }
  return weighted / weight_sum;
}

}  // namespace pms
