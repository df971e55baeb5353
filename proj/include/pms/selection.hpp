#pragma once

#include "pms/fqi.hpp"
#include "pms/mdp.hpp"
#include "pms/ope.hpp"

#include <vector>

namespace pms {

/// Settings for the ratio-function nuisance fit inside the selection loop.
struct RatioFitConfig {
  FeatureKind feature_kind = FeatureKind::TabularOneHot;
  int tile_size = 1;
  double lambda = 1e-6;
  double clip_min = 1e-3;
  double clip_max = 1e3;
};

struct SelectionConfig {
  int n_chunks = 20;  // O
  double alpha = 0.01;
  bool refit_full = true;  // refit candidates on the full dataset at the end
  RatioFitConfig ratio;
  double sigma_floor = kDefaultSigmaFloor;

  void validate() const;
};

/// Per-candidate aggregate row of a selection report.
struct CandidateSummary {
  std::string id;
  double value = 0.0;        // inverse-sigma aggregated estimate
  double sigma = 0.0;        // harmonic-mean sigma
  double se = 0.0;           // sigma * sqrt(O / (nT (O-1)))
  double lower_bound = 0.0;  // value - z_{alpha/2} * se
  double interval_lo = 0.0;  // value -+ 2 z_{alpha/(2L)} * se
  double interval_hi = 0.0;
};

struct ChosenIndices {
  int pms = -1;
  int lepski = -1;
  int combined = -1;
};

struct SelectionReport {
  std::vector<CandidateEvaluation> evaluations;
  std::vector<CandidateSummary> candidates;
  std::vector<int> sigma_order;  // candidate indices sorted by sigma, non-increasing
  ChosenIndices chosen;
  int lepski_prefix = 0;  // number of sorted positions kept by the Lepski rule
  double alpha = 0.0;
  int n_chunks = 0;
  std::size_t retained_transitions = 0;
  double z_half_alpha = 0.0;
  double z_lepski = 0.0;
  double se_scale = 0.0;
  std::vector<QApprox> final_q;        // one per candidate
  std::vector<Policy> final_policies;  // one per candidate
};

struct LepskiChoice {
  int candidate = -1;  // original candidate index
  int prefix = 0;      // kept prefix length in sigma order
};

struct CombinedChoice {
  int candidate = -1;
  int sorted_position = 0;  // 1-based position in sigma order
};

/// (1 - p)-quantile lives at normal_quantile(1 - p); this is the inverse
/// standard-normal CDF, accurate to well below 1e-8 absolute error.
double normal_quantile(double p);

/// sqrt(O / (nT (O-1))) with nT the number of retained transitions.
double se_scale_factor(int n_chunks, std::size_t retained_transitions);

/// Builds summary rows (se, lower bound, interval) from aggregated
/// evaluations. Exposed separately so the arithmetic is testable on its own.
std::vector<CandidateSummary> summarize_candidates(const std::vector<CandidateEvaluation>& evals,
                                                   double alpha, int n_chunks,
                                                   std::size_t retained_transitions);

/// Candidate indices ordered by sigma non-increasing; ties keep original order.
std::vector<int> sigma_sorted_order(const std::vector<CandidateSummary>& candidates);

/// The sequential pessimistic selection loop: for each stage o, fit each
/// candidate's Q and greedy policy on the cumulative chunks 1..o, fit the
/// ratio for that policy on the same data, and evaluate value/sigma on chunk
/// o+1. Aggregates, computes lower confidence bounds, and fills all three
/// chosen indices (the Lepski and combined refinements included). Only the
/// dimensions and init_dist of `mdp` are consulted.
SelectionReport pessimistic_select(const Dataset& data, const TabularMdp& mdp,
                                   const std::vector<CandidateConfig>& candidates,
                                   const SelectionConfig& config);

/// Largest sigma-sorted prefix whose intervals still share a point; returns
/// the candidate at the last kept position.
LepskiChoice lepski_select(const SelectionReport& report, double alpha);

/// Pessimistic argmax of value - 2 z_{alpha/2} se over the Lepski prefix.
CombinedChoice combined_select(const SelectionReport& report, double alpha);

}  // namespace pms
