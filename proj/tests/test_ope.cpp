#include "pms/ope.hpp"

#include "pms/env.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pms;
using testutil::one_action_policy;
using testutil::one_state_mdp;

namespace {

QApprox constant_q(double value, int n_states, int n_actions) {
  FeatureMap features = make_tabular_features(n_states, n_actions);
  return {Vector::Constant(features.dimension(), value), features};
}

QApprox q_from_table(const Matrix& table) {
  const int n_states = static_cast<int>(table.rows());
  const int n_actions = static_cast<int>(table.cols());
  FeatureMap features = make_tabular_features(n_states, n_actions);
  QApprox q{Vector::Zero(features.dimension()), features};
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) q.weights(features.active_index(s, a)) = table(s, a);
  }
  return q;
}

RatioApprox ratio_constant(double value, int n_states, int n_actions) {
  FeatureMap features = make_tabular_features(n_states, n_actions);
  return {Vector::Constant(features.dimension(), value), features, 1e-6, 1e6};
}

RatioApprox ratio_from_table(const RatioTable& table) {
  const int n_states = static_cast<int>(table.omega.rows());
  const int n_actions = static_cast<int>(table.omega.cols());
  FeatureMap features = make_tabular_features(n_states, n_actions);
  RatioApprox omega{Vector::Zero(features.dimension()), features, 1e-9, 1e9};
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      omega.weights(features.active_index(s, a)) = table.defined(s, a) ? table.omega(s, a) : 1.0;
    }
  }
  return omega;
}

// Chain started at the stationary distribution of the behavior chain, so the
// logged pairs are stationary and the exact ratio table matches the data law.
struct StationaryChainSetup {
  TabularMdp mdp;
  Policy behavior;
  Policy target;
  RatioTable exact_ratio;
  int horizon;
};

StationaryChainSetup stationary_chain(int n_states, double forward_prob, double gamma,
                                      double behavior_eps, int horizon) {
  StationaryChainSetup setup;
  setup.horizon = horizon;
  setup.mdp = build_chain(ChainSpec{n_states, forward_prob, 1.0}, gamma);
  Policy best = greedy_from_q_table(oracle::value_iteration_q(setup.mdp, 1e-14));
  setup.behavior = make_behavior_policy(best, behavior_eps);
  setup.target = make_behavior_policy(best, 0.1);
  Matrix pairs = stationary_distribution(setup.mdp, setup.behavior);
  setup.mdp.init_dist = pairs.rowwise().sum();
  setup.mdp.init_dist /= setup.mdp.init_dist.sum();
  setup.exact_ratio = visitation_ratio_exact(setup.mdp, setup.target, setup.behavior, horizon);
  return setup;
}

}  // namespace

TEST_SUITE("ope") {

TEST_CASE("fit_ratio: point-mass chain recovers omega = 1 exactly") {
  TabularMdp mdp = one_state_mdp(1.0, 0.5);
  std::vector<Transition> data{{0, 0, 0, 0, 1.0, 0}, {0, 1, 0, 0, 1.0, 0}};
  FeatureMap features = make_tabular_features(1, 1);
  RatioApprox omega = fit_ratio(data, one_action_policy(), mdp, features, 0.5, 0.0);
  CHECK(omega.evaluate(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_ratio: on-policy stationary data stays near 1") {
  // target == behavior from a stationary start, so the true ratio is 1.
  StationaryChainSetup setup = stationary_chain(3, 0.7, 0.9, 0.5, 50);
  Dataset data = collect_trajectories(setup.mdp, setup.behavior, 200, 50, 5051);
  FeatureMap features = make_tabular_features(setup.mdp.n_states, setup.mdp.n_actions);
  RatioApprox omega =
      fit_ratio(data.transitions, setup.behavior, setup.mdp, features, setup.mdp.gamma, 1e-8);
  double worst = 0.0;
  for (const Transition& tr : data.transitions) {
    worst = std::max(worst, std::abs(omega.evaluate(tr.state, tr.action) - 1.0));
  }
  CHECK(worst <= 0.1);
}

TEST_CASE("fit_ratio: off-policy estimate approaches the exact table") {
  StationaryChainSetup setup = stationary_chain(2, 0.7, 0.9, 0.5, 50);
  Dataset data = collect_trajectories(setup.mdp, setup.behavior, 2000, 50, 909);
  FeatureMap features = make_tabular_features(2, 2);
  RatioApprox omega =
      fit_ratio(data.transitions, setup.target, setup.mdp, features, setup.mdp.gamma, 1e-8);
  double worst = 0.0;
  for (const Transition& tr : data.transitions) {
    REQUIRE(setup.exact_ratio.defined(tr.state, tr.action));
    worst = std::max(worst, std::abs(omega.evaluate(tr.state, tr.action) -
                                     setup.exact_ratio.omega(tr.state, tr.action)));
  }
  CHECK(worst <= 0.1);
}

TEST_CASE("fit_ratio: singular system without ridge raises, clipping applies") {
  TabularMdp mdp = build_chain(ChainSpec{2, 1.0, 1.0}, 0.9);
  std::vector<Transition> data{{0, 0, 0, 0, 1.0, 1}};  // three cells unseen
  FeatureMap features = make_tabular_features(2, 2);
  CHECK_THROWS_AS(fit_ratio(data, uniform_policy(2, 2), mdp, features, 0.9, 0.0),
                  std::invalid_argument);

  RatioApprox wide{Vector::Constant(4, 50.0), features, 1e-3, 2.0};
  CHECK(wide.evaluate(0, 0) == 2.0);
  wide.weights.setConstant(-1.0);
  CHECK(wide.evaluate(0, 0) == 1e-3);
}

TEST_CASE("dr_value_chunk: plug-in collapse at gamma=0") {
  std::vector<Transition> chunk{{0, 0, 0, 0, 2.0, 0}, {0, 1, 0, 0, 4.0, 0}};
  QApprox q = constant_q(0.0, 1, 1);
  RatioApprox omega = ratio_constant(1.0, 1, 1);
  Vector nu = Vector::Constant(1, 1.0);
  CHECK(dr_value_chunk(q, one_action_policy(), omega, chunk, nu, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("dr_value_chunk: exact Q on a deterministic MDP zeroes the residual") {
  TabularMdp mdp = build_gridworld(testutil::lake_spec(0.0), 0.95, InitDistMode::Start);
  Policy pi = greedy_from_q_table(oracle::value_iteration_q(mdp, 1e-14));
  QApprox q = q_from_table(q_value_exact(mdp, pi));
  Policy behavior = make_behavior_policy(pi, 0.5);
  Dataset data = collect_trajectories(mdp, behavior, 20, 30, 11);

  RatioApprox arbitrary = ratio_constant(3.7, mdp.n_states, mdp.n_actions);
  double value = dr_value_chunk(q, pi, arbitrary, data.transitions, mdp.init_dist, mdp.gamma);
  CHECK(std::abs(value - policy_value_exact(mdp, pi)) <= 1e-10);
}

TEST_CASE("dr_value_chunk and dr_variance_chunk on the single-transition example") {
  std::vector<Transition> chunk{{0, 0, 0, 0, 1.0, 0}};
  QApprox q = constant_q(1.0, 1, 1);
  RatioApprox omega = ratio_constant(2.0, 1, 1);
  Vector nu = Vector::Constant(1, 1.0);
  // nu term: 0.5 * 1; correction: 2 * (1 + 0.5 - 1) = 1
  CHECK(dr_value_chunk(q, one_action_policy(), omega, chunk, nu, 0.5) == doctest::Approx(1.5));
  SigmaEstimate sig = dr_variance_chunk(q, one_action_policy(), omega, chunk, 0.5);
  CHECK(sig.sigma == doctest::Approx(1.0));
  CHECK_FALSE(sig.clamped);
}

TEST_CASE("dr_variance_chunk: zero residual hits the floor; gamma=0 gives mean R^2") {
  std::vector<Transition> chunk{{0, 0, 0, 0, 0.0, 0}};
  QApprox q = constant_q(0.0, 1, 1);
  RatioApprox omega = ratio_constant(1.0, 1, 1);
  SigmaEstimate sig = dr_variance_chunk(q, one_action_policy(), omega, chunk, 0.0);
  CHECK(sig.sigma == kDefaultSigmaFloor);
  CHECK(sig.clamped);

  std::vector<Transition> rewards{{0, 0, 0, 0, 1.0, 0}, {0, 1, 0, 0, 3.0, 0}};
  sig = dr_variance_chunk(q, one_action_policy(), omega, rewards, 0.0);
  CHECK(sig.sigma == doctest::Approx(std::sqrt(5.0)));  // mean of {1, 9}
  CHECK(dr_value_chunk(q, one_action_policy(), omega, rewards, Vector::Constant(1, 1.0), 0.0) ==
        doctest::Approx(2.0));
}

TEST_CASE("aggregation formulas") {
  std::vector<ChunkEvaluation> evals{{2, 0.0, 1.0, false}, {3, 4.0, 3.0, false}};
  CHECK(aggregate_value(evals) == doctest::Approx(1.0));
  CHECK(aggregate_sigma(evals) == doctest::Approx(1.5));

  std::vector<ChunkEvaluation> equal{{2, 1.0, 0.7, false}, {3, 3.0, 0.7, false}};
  CHECK(aggregate_value(equal) == doctest::Approx(2.0));
  CHECK(aggregate_sigma(equal) == doctest::Approx(0.7));

  std::vector<ChunkEvaluation> single{{2, 5.0, 0.3, false}};
  CHECK(aggregate_value(single) == doctest::Approx(5.0));
  CHECK(aggregate_sigma(single) == doctest::Approx(0.3));
}

TEST_CASE("aggregates stay inside the chunk ranges") {
  std::mt19937_64 gen(606);
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ChunkEvaluation> evals;
    double lo_v = 1e18, hi_v = -1e18, lo_s = 1e18, hi_s = -1e18;
    int n = 1 + static_cast<int>(gen() % 8);
    for (int i = 0; i < n; ++i) {
      ChunkEvaluation e{i + 2, unif(gen) * 4.0 - 2.0, unif(gen), false};
      lo_v = std::min(lo_v, e.value);
      hi_v = std::max(hi_v, e.value);
      lo_s = std::min(lo_s, e.sigma);
      hi_s = std::max(hi_s, e.sigma);
      evals.push_back(e);
    }
    double v = aggregate_value(evals);
    double s = aggregate_sigma(evals);
    CHECK(v >= lo_v - 1e-12);
    CHECK(v <= hi_v + 1e-12);
    CHECK(s >= lo_s - 1e-12);
    CHECK(s <= hi_s + 1e-12);
  }
}

TEST_CASE("naive greedy score") {
  QApprox q = constant_q(2.5, 3, 2);
  Vector nu = Vector::Constant(3, 1.0 / 3.0);
  CHECK(naive_greedy_score(q, uniform_policy(3, 2), nu) == doctest::Approx(2.5));

  Matrix table(2, 2);
  table << 1.0, -5.0, -5.0, 3.0;
  QApprox q2 = q_from_table(table);
  Policy det;
  det.probs = Matrix::Zero(2, 2);
  det.probs(0, 0) = 1.0;
  det.probs(1, 1) = 1.0;
  Vector half = Vector::Constant(2, 0.5);
  CHECK(naive_greedy_score(q2, det, half) == doctest::Approx(2.0));
}

TEST_CASE("marginal IS and WIS trivial cases") {
  TabularMdp mdp = one_state_mdp(3.0, 0.5);
  Dataset data = collect_trajectories(mdp, one_action_policy(), 3, 4, 5);
  RatioApprox unit = ratio_constant(1.0, 1, 1);
  CHECK(marginal_is_value(unit, data) == doctest::Approx(3.0));
  CHECK(wis_value(unit, data) == doctest::Approx(3.0));

  RatioApprox scaled = ratio_constant(7.0, 1, 1);
  CHECK(wis_value(scaled, data) == doctest::Approx(3.0));  // scale cancels

  Dataset single;
  single.n_episodes = 1;
  single.horizon = 1;
  single.transitions = {{0, 0, 0, 0, -2.5, 0}};
  CHECK(wis_value(scaled, single) == doctest::Approx(-2.5));
}

TEST_CASE("WIS is invariant to rescaling the ratio") {
  StationaryChainSetup setup = stationary_chain(3, 0.7, 0.9, 0.6, 20);
  Dataset data = collect_trajectories(setup.mdp, setup.behavior, 50, 20, 21);
  RatioApprox omega = ratio_from_table(setup.exact_ratio);
  double base = wis_value(omega, data);
  for (double c : {0.2, 3.0, 117.0}) {
    RatioApprox scaled = omega;
    scaled.weights *= c;
    scaled.clip_max = 1e12;
    CHECK(wis_value(scaled, data) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("IS and WIS with the exact ratio match the exact value within 3 SE") {
  StationaryChainSetup setup = stationary_chain(3, 0.7, 0.9, 0.5, 50);
  const int n = 2000, horizon = 50;
  Dataset data = collect_trajectories(setup.mdp, setup.behavior, n, horizon, 112233);
  RatioApprox omega = ratio_from_table(setup.exact_ratio);

  double target_value = policy_value_exact(setup.mdp, setup.target);
  double is_estimate = marginal_is_value(omega, data);

  // standard error of the per-transition terms
  double mean_sq = 0.0;
  for (const Transition& tr : data.transitions) {
    double term = omega.evaluate(tr.state, tr.action) * tr.reward;
    mean_sq += (term - is_estimate) * (term - is_estimate);
  }
  double se = std::sqrt(mean_sq / data.transitions.size() / data.transitions.size());
  CHECK(std::abs(is_estimate - target_value) <= 3.0 * se);

  double wis_estimate = wis_value(omega, data);
  double mean_omega = 0.0, u_sq = 0.0;
  for (const Transition& tr : data.transitions) {
    mean_omega += omega.evaluate(tr.state, tr.action);
  }
  mean_omega /= data.transitions.size();
  for (const Transition& tr : data.transitions) {
    double u = omega.evaluate(tr.state, tr.action) * (tr.reward - wis_estimate);
    u_sq += u * u;
  }
  double wis_se = std::sqrt(u_sq) / (mean_omega * data.transitions.size());
  CHECK(std::abs(wis_estimate - target_value) <= 3.0 * wis_se);
}

TEST_CASE("DR with exact nuisances is unbiased over resampled chunks") {
  StationaryChainSetup setup = stationary_chain(3, 0.7, 0.9, 0.5, 25);
  QApprox q = q_from_table(q_value_exact(setup.mdp, setup.target));
  RatioApprox omega = ratio_from_table(setup.exact_ratio);
  double exact = policy_value_exact(setup.mdp, setup.target);

  const int n_chunks = 500, episodes = 4, horizon = 25;
  const int chunk_size = episodes * horizon;
  std::vector<Transition> pooled;
  double mean = 0.0;
  for (int r = 0; r < n_chunks; ++r) {
    Dataset data =
        collect_trajectories(setup.mdp, setup.behavior, episodes, horizon, 90000 + r);
    mean += dr_value_chunk(q, setup.target, omega, data.transitions, setup.mdp.init_dist,
                           setup.mdp.gamma);
    pooled.insert(pooled.end(), data.transitions.begin(), data.transitions.end());
  }
  mean /= n_chunks;
  SigmaEstimate sig = dr_variance_chunk(q, setup.target, omega, pooled, setup.mdp.gamma);
  double bound = 3.0 * sig.sigma / std::sqrt(static_cast<double>(n_chunks) * chunk_size);
  CHECK(std::abs(mean - exact) <= bound);
}

TEST_CASE("doubly robust: exact ratio with a zero Q stays within 3 SE") {
  StationaryChainSetup setup = stationary_chain(3, 0.7, 0.9, 0.5, 50);
  QApprox zero_q = constant_q(0.0, 3, 2);
  RatioApprox omega = ratio_from_table(setup.exact_ratio);
  Dataset data = collect_trajectories(setup.mdp, setup.behavior, 2000, 50, 445566);

  double estimate = dr_value_chunk(zero_q, setup.target, omega, data.transitions,
                                   setup.mdp.init_dist, setup.mdp.gamma);
  SigmaEstimate sig = dr_variance_chunk(zero_q, setup.target, omega, data.transitions,
                                        setup.mdp.gamma);
  double se = sig.sigma / std::sqrt(static_cast<double>(data.transitions.size()));
  CHECK(std::abs(estimate - policy_value_exact(setup.mdp, setup.target)) <= 3.0 * se);
}

TEST_CASE("estimators reject empty inputs") {
  QApprox q = constant_q(0.0, 1, 1);
  RatioApprox omega = ratio_constant(1.0, 1, 1);
  Vector nu = Vector::Constant(1, 1.0);
  CHECK_THROWS_AS(dr_value_chunk(q, one_action_policy(), omega, {}, nu, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(dr_variance_chunk(q, one_action_policy(), omega, {}, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(aggregate_value({}), std::invalid_argument);
  Dataset empty;
  CHECK_THROWS_AS(marginal_is_value(omega, empty), std::invalid_argument);
}

}  // TEST_SUITE
