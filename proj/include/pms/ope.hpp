#pragma once

#include "pms/features.hpp"
#include "pms/fqi.hpp"
#include "pms/mdp.hpp"

#include <string>
#include <vector>

namespace pms {

/// Linear-in-features estimate of the discounted visitation ratio. Outputs
/// are clipped into [clip_min, clip_max] on evaluation, keeping the ratio
/// bounded and bounded away from zero.
struct RatioApprox {
  Vector weights;
  FeatureMap features;
  double clip_min = 1e-3;
  double clip_max = 1e3;

  double evaluate(int state, int action) const;
};

/// Per-chunk doubly-robust estimate: value and the square root of the
/// uncentered second moment of the augmentation term. sigma is floored;
/// `clamped` records when the floor was applied.
struct ChunkEvaluation {
  int chunk = 0;  // evaluation chunk index o+1, in 2..O
  double value = 0.0;
  double sigma = 0.0;
  bool clamped = false;
};

/// All per-chunk evaluations for one candidate plus their aggregates.
struct CandidateEvaluation {
  std::string candidate_id;
  std::vector<ChunkEvaluation> chunk_evals;
  double value_agg = 0.0;  // inverse-sigma weighted mean of chunk values
  double sigma_agg = 0.0;  // harmonic mean of chunk sigmas
};

inline constexpr double kDefaultSigmaFloor = 1e-6;

/// Fits the ratio by turning the stationarity identity into a linear system:
/// with omega = beta . psi and test functions equal to the same one-hot
/// basis, solve
///   Avg[(phi(S,A) - gamma sum_a' pi(a'|S') phi(S',a')) psi(S,A)^T] beta
///     = (1 - gamma) E_{S0~nu}[sum_a pi(a|S0) phi(S0,a)]
/// with ridge `lambda` added to the diagonal. The nu-side expectation is
/// enumerated exactly over the finite state space. Only the dimensions and
/// init_dist of `mdp` are read.
RatioApprox fit_ratio(const std::vector<Transition>& data, const Policy& pi,
                      const TabularMdp& mdp, const FeatureMap& features, double gamma,
                      double lambda, double clip_min = 1e-3, double clip_max = 1e3);

/// Doubly-robust value on one chunk:
///   (1-gamma) E_{S0~nu}[sum_a pi(a|S0) Q(S0,a)]
///     + Avg_chunk[ omega(S,A) (R + gamma sum_a' pi(a'|S') Q(S',a') - Q(S,A)) ].
double dr_value_chunk(const QApprox& q, const Policy& pi, const RatioApprox& omega,
                      const std::vector<Transition>& chunk, const Vector& nu, double gamma);

struct SigmaEstimate {
  double sigma = 0.0;
  bool clamped = false;
};

/// Square root of the chunk average of the squared augmentation term,
/// floored at sigma_floor. Uncentered by construction.
SigmaEstimate dr_variance_chunk(const QApprox& q, const Policy& pi, const RatioApprox& omega,
                                const std::vector<Transition>& chunk, double gamma,
                                double sigma_floor = kDefaultSigmaFloor);

/// Inverse-sigma weighted mean of the chunk values.
double aggregate_value(const std::vector<ChunkEvaluation>& chunk_evals);

/// Harmonic mean of the chunk sigmas.
double aggregate_sigma(const std::vector<ChunkEvaluation>& chunk_evals);

/// Plug-in score E_{S0~nu}[sum_a pi(a|S0) Q(S0,a)]; the overfitting-prone
/// baseline selector.
double naive_greedy_score(const QApprox& q, const Policy& pi, const Vector& nu);

/// Marginal importance-sampling estimate: mean over transitions of omega * R.
double marginal_is_value(const RatioApprox& omega, const Dataset& data);

/// Self-normalized variant: sum(omega * R) / sum(omega).
double wis_value(const RatioApprox& omega, const Dataset& data);

}  // namespace pms
