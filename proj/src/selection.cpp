#include "pms/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pms {

void SelectionConfig::validate() const {
  if (n_chunks < 2) throw std::invalid_argument("selection needs at least 2 chunks");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma_floor must be positive");
  if (!(ratio.clip_min > 0.0) || ratio.clip_min > ratio.clip_max) {
    throw std::invalid_argument("ratio clip bounds need 0 < min <= max");
  }
  if (ratio.lambda < 0.0) throw std::invalid_argument("ratio lambda must be >= 0");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile needs p in (0, 1)");

  // Acklam's rational approximation, then one Halley step against the exact
  // erfc-based CDF to push the error to machine level.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double sqrt_two_pi = 2.5066282746310002;
  double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = err * sqrt_two_pi * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double se_scale_factor(int n_chunks, std::size_t retained_transitions) {
  if (n_chunks < 2 || retained_transitions == 0) {
    throw std::invalid_argument("se scale needs O >= 2 and retained transitions > 0");
  }
  return std::sqrt(static_cast<double>(n_chunks) /
                   (static_cast<double>(retained_transitions) * (n_chunks - 1)));
}

std::vector<CandidateSummary> summarize_candidates(const std::vector<CandidateEvaluation>& evals,
                                                   double alpha, int n_chunks,
                                                   std::size_t retained_transitions) {
  if (evals.empty()) throw std::invalid_argument("no candidate evaluations");
  const double scale = se_scale_factor(n_chunks, retained_transitions);
  const double z_half = normal_quantile(1.0 - alpha / 2.0);
  const double z_lepski = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(evals.size())));

  std::vector<CandidateSummary> rows;
  rows.reserve(evals.size());
  for (const CandidateEvaluation& eval : evals) {
    CandidateSummary row;
    row.id = eval.candidate_id;
    row.value = eval.value_agg;
    row.sigma = eval.sigma_agg;
    row.se = eval.sigma_agg * scale;
    row.lower_bound = row.value - z_half * row.se;
    double half_width = 2.0 * z_lepski * row.se;
    row.interval_lo = row.value - half_width;
    row.interval_hi = row.value + half_width;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> sigma_sorted_order(const std::vector<CandidateSummary>& candidates) {
  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return candidates[i].sigma > candidates[j].sigma; });
  return order;
}

namespace {

int argmax_lower_bound(const std::vector<CandidateSummary>& rows) {
  int best = 0;
  for (int l = 1; l < static_cast<int>(rows.size()); ++l) {
    if (rows[l].lower_bound > rows[best].lower_bound) best = l;
  }
  return best;
}

std::vector<Transition> gather(const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<Transition> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(data.transitions[idx]);
  return out;
}

}  // namespace

SelectionReport pessimistic_select(const Dataset& data, const TabularMdp& mdp,
                                   const std::vector<CandidateConfig>& candidates,
                                   const SelectionConfig& config) {
  config.validate();
  if (candidates.empty()) throw std::invalid_argument("need at least one candidate model");

  ChunkPartition partition = partition_dataset(data, config.n_chunks);
  std::vector<std::vector<Transition>> chunks;
  chunks.reserve(partition.chunks.size());
  for (const auto& idx : partition.chunks) chunks.push_back(gather(data, idx));

  FeatureMap ratio_features =
      config.ratio.feature_kind == FeatureKind::TabularOneHot
          ? make_tabular_features(mdp.n_states, mdp.n_actions)
          : make_coarse_features(mdp.n_states, mdp.n_actions, config.ratio.tile_size);

  SelectionReport report;
  report.alpha = config.alpha;
  report.n_chunks = config.n_chunks;
  report.retained_transitions = partition.retained();
  report.se_scale = se_scale_factor(config.n_chunks, report.retained_transitions);
  report.z_half_alpha = normal_quantile(1.0 - config.alpha / 2.0);
  report.z_lepski =
      normal_quantile(1.0 - config.alpha / (2.0 * static_cast<double>(candidates.size())));
  report.evaluations.resize(candidates.size());
  report.final_q.resize(candidates.size());
  report.final_policies.resize(candidates.size());

  for (std::size_t l = 0; l < candidates.size(); ++l) {
    const CandidateConfig& cand = candidates[l];
    CandidateEvaluation& eval = report.evaluations[l];
    eval.candidate_id = cand.id;

    std::vector<Transition> cumulative;
    for (int o = 0; o + 1 < config.n_chunks; ++o) {
      cumulative.insert(cumulative.end(), chunks[o].begin(), chunks[o].end());
      QApprox q = fqi_fit(cumulative, cand, mdp.n_states, mdp.n_actions);
      Policy pi = greedy_policy(q, mdp.n_states, mdp.n_actions);
      RatioApprox omega =
          fit_ratio(cumulative, pi, mdp, ratio_features, cand.gamma, config.ratio.lambda,
                    config.ratio.clip_min, config.ratio.clip_max);

      ChunkEvaluation chunk_eval;
      chunk_eval.chunk = o + 2;  // evaluation happens on the next chunk
      chunk_eval.value = dr_value_chunk(q, pi, omega, chunks[o + 1], mdp.init_dist, cand.gamma);
      SigmaEstimate sig =
          dr_variance_chunk(q, pi, omega, chunks[o + 1], cand.gamma, config.sigma_floor);
      chunk_eval.sigma = sig.sigma;
      chunk_eval.clamped = sig.clamped;
      eval.chunk_evals.push_back(chunk_eval);
    }
    eval.value_agg = aggregate_value(eval.chunk_evals);
    eval.sigma_agg = aggregate_sigma(eval.chunk_evals);

    if (config.refit_full) {
      report.final_q[l] = fqi_fit(data.transitions, cand, mdp.n_states, mdp.n_actions);
    } else {
      cumulative.insert(cumulative.end(), chunks.back().begin(), chunks.back().end());
      report.final_q[l] = fqi_fit(cumulative, cand, mdp.n_states, mdp.n_actions);
    }
    report.final_policies[l] = greedy_policy(report.final_q[l], mdp.n_states, mdp.n_actions);
  }

  report.candidates = summarize_candidates(report.evaluations, config.alpha, config.n_chunks,
                                           report.retained_transitions);
  report.sigma_order = sigma_sorted_order(report.candidates);
  report.chosen.pms = argmax_lower_bound(report.candidates);

  LepskiChoice lepski = lepski_select(report, config.alpha);
  report.chosen.lepski = lepski.candidate;
  report.lepski_prefix = lepski.prefix;
  report.chosen.combined = combined_select(report, config.alpha).candidate;
  return report;
}

LepskiChoice lepski_select(const SelectionReport& report, double alpha) {
  const int L = static_cast<int>(report.candidates.size());
  if (L < 1) throw std::invalid_argument("report holds no candidates");
  std::vector<int> order = sigma_sorted_order(report.candidates);
  const double z = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(L)));

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  int prefix = 0;
  for (int pos = 0; pos < L; ++pos) {
    const CandidateSummary& cand = report.candidates[order[pos]];
    double half_width = 2.0 * z * cand.se;
    lo = std::max(lo, cand.value - half_width);
    hi = std::min(hi, cand.value + half_width);
    if (lo > hi) break;
    prefix = pos + 1;
  }
  return {order[prefix - 1], prefix};
}

CombinedChoice combined_select(const SelectionReport& report, double alpha) {
  LepskiChoice lepski = lepski_select(report, alpha);
  std::vector<int> order = sigma_sorted_order(report.candidates);
  const double z = normal_quantile(1.0 - alpha / 2.0);

  int best_pos = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int pos = 0; pos < lepski.prefix; ++pos) {
    const CandidateSummary& cand = report.candidates[order[pos]];
    double lcb = cand.value - 2.0 * z * cand.se;
    if (lcb > best) {
      best = lcb;
      best_pos = pos;
    }
  }
  return {order[best_pos], best_pos + 1};
}

}  // namespace pms
