#include "pms/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pms {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_distribution(const Vector& row, const char* what) {
  if (row.minCoeff() < 0.0) {
    throw std::invalid_argument(std::string(what) + " has a negative entry");
  }
  if (std::abs(row.sum() - 1.0) > kStochasticTol) {
    std::ostringstream msg;
    msg << what << " sums to " << row.sum() << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("TabularMdp needs at least one state and one action");
  }
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("discount must lie in [0, 1)");
  }
  if (static_cast<int>(transition.size()) != n_actions) {
    throw std::invalid_argument("transition tensor has wrong action count");
  }
  for (int a = 0; a < n_actions; ++a) {
    if (transition[a].rows() != n_states || transition[a].cols() != n_states) {
      throw std::invalid_argument("transition matrix has wrong shape");
    }
    for (int s = 0; s < n_states; ++s) {
      check_distribution(transition[a].row(s).transpose(), "transition row");
    }
  }
  if (reward.rows() != n_states || reward.cols() != n_actions) {
    throw std::invalid_argument("reward table has wrong shape");
  }
  if (init_dist.size() != n_states) {
    throw std::invalid_argument("init_dist has wrong length");
  }
  check_distribution(init_dist, "init_dist");
}

void Policy::validate(int n_states, int n_actions) const {
  if (probs.rows() != n_states || probs.cols() != n_actions) {
    throw std::invalid_argument("policy table has wrong shape");
  }
  for (int s = 0; s < n_states; ++s) {
    check_distribution(probs.row(s).transpose(), "policy row");
  }
}

Policy uniform_policy(int n_states, int n_actions) {
  Policy pi;
  pi.probs = Matrix::Constant(n_states, n_actions, 1.0 / n_actions);
  return pi;
}

void Dataset::validate() const {
  if (n_episodes < 1 || horizon < 1) {
    throw std::invalid_argument("dataset needs n_episodes >= 1 and horizon >= 1");
  }
  if (transitions.size() != static_cast<std::size_t>(n_episodes) * horizon) {
    throw std::invalid_argument("dataset must hold exactly n_episodes * horizon transitions");
  }
  for (int i = 0; i < n_episodes; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const Transition& tr = transitions[static_cast<std::size_t>(i) * horizon + t];
      if (tr.episode != i || tr.time != t) {
        throw std::invalid_argument("dataset transitions out of episode/time order");
      }
      if (t + 1 < horizon) {
        const Transition& next = transitions[static_cast<std::size_t>(i) * horizon + t + 1];
        if (next.state != tr.next_state) {
          throw std::invalid_argument("episode states do not chain");
        }
      }
    }
  }
}

std::size_t ChunkPartition::retained() const {
  std::size_t total = 0;
  for (const auto& c : chunks) total += c.size();
  return total;
}

namespace {

// P_pi(s, s') = sum_a pi(a | s) p(s' | s, a)
Matrix policy_transition(const TabularMdp& mdp, const Policy& pi) {
  Matrix p = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    p += pi.probs.col(a).asDiagonal() * mdp.transition[a];
  }
  return p;
}

Vector policy_reward(const TabularMdp& mdp, const Policy& pi) {
  return (mdp.reward.array() * pi.probs.array()).rowwise().sum();
}

}  // namespace

Vector state_values_exact(const TabularMdp& mdp, const Policy& pi) {
  mdp.validate();
  pi.validate(mdp.n_states, mdp.n_actions);
  Matrix system = Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * policy_transition(mdp, pi);
  return system.partialPivLu().solve(policy_reward(mdp, pi));
}

double policy_value_exact(const TabularMdp& mdp, const Policy& pi) {
  return (1.0 - mdp.gamma) * mdp.init_dist.dot(state_values_exact(mdp, pi));
}

Matrix q_value_exact(const TabularMdp& mdp, const Policy& pi) {
  Vector v = state_values_exact(mdp, pi);
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a) {
    q.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[a] * v;
  }
  return q;
}

Matrix optimal_q_exact(const TabularMdp& mdp, double tol) {
  mdp.validate();
  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  // gamma-contraction; iteration count bounded by log(tol) / log(gamma)
  const int max_iters = 2'000'000;
  for (int k = 0; k < max_iters; ++k) {
    Vector v = q.rowwise().maxCoeff();
    Matrix next(mdp.n_states, mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) {
      next.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[a] * v;
    }
    double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta <= tol) break;
  }
  return q;
}

Policy greedy_from_q_table(const Matrix& q) {
  Policy pi;
  pi.probs = Matrix::Zero(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    pi.probs(s, best) = 1.0;
  }
  return pi;
}

namespace {

// Strongly connected components of the support graph of P (Tarjan, iterative).
std::vector<int> scc_labels(const Matrix& p, int& n_components) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> index(n, -1), lowlink(n, 0), component(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int next_index = 0;
  n_components = 0;

  struct Frame {
    int v;
    int child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call_stack{{root, 0}};
    index[root] = lowlink[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call_stack.empty()) {
      Frame& frame = call_stack.back();
      int v = frame.v;
      bool descended = false;
      while (frame.child < n) {
        int w = frame.child++;
        if (p(v, w) <= 0.0) continue;
        if (index[w] == -1) {
          index[w] = lowlink[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call_stack.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) lowlink[v] = std::min(lowlink[v], index[w]);
      }
      if (descended) continue;
      if (lowlink[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component[w] = n_components;
        } while (w != v);
        ++n_components;
      }
      call_stack.pop_back();
      if (!call_stack.empty()) {
        int parent = call_stack.back().v;
        lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
      }
    }
  }
  return component;
}

}  // namespace

Matrix stationary_distribution(const TabularMdp& mdp, const Policy& pi) {
  mdp.validate();
  pi.validate(mdp.n_states, mdp.n_actions);
  Matrix p = policy_transition(mdp, pi);

  int n_components = 0;
  std::vector<int> component = scc_labels(p, n_components);
  // A component is recurrent iff it has no edge leaving it.
  std::vector<bool> is_sink(n_components, true);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
      if (p(s, s2) > 0.0 && component[s] != component[s2]) is_sink[component[s]] = false;
    }
  }
  int n_recurrent = static_cast<int>(std::count(is_sink.begin(), is_sink.end(), true));
  if (n_recurrent != 1) {
    std::ostringstream msg;
    msg << "chain induced by the policy has " << n_recurrent
        << " recurrent classes; a unique stationary distribution requires exactly one";
    throw std::invalid_argument(msg.str());
  }

  // Solve d^T P = d^T, sum(d) = 1 as a stacked least-squares system; the
  // solution is exact and unique given a single recurrent class.
  const int n = mdp.n_states;
  Matrix system(n + 1, n);
  system.topRows(n) = p.transpose() - Matrix::Identity(n, n);
  system.row(n).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;
  Vector d = system.colPivHouseholderQr().solve(rhs);
  d = d.cwiseMax(0.0);
  d /= d.sum();

  Matrix result(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    result.row(s) = d(s) * pi.probs.row(s);
  }
  return result;
}

namespace {

// Flattened index over state-action pairs.
inline int flat(int s, int a, int n_actions) { return s * n_actions + a; }

// M((s,a),(s',a')) = p(s'|s,a) pi(a'|s'): one step of the state-action chain.
Matrix pair_transition(const TabularMdp& mdp, const Policy& pi) {
  const int dim = mdp.n_states * mdp.n_actions;
  Matrix m = Matrix::Zero(dim, dim);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        double p = mdp.transition[a](s, s2);
        if (p == 0.0) continue;
        for (int a2 = 0; a2 < mdp.n_actions; ++a2) {
          m(flat(s, a, mdp.n_actions), flat(s2, a2, mdp.n_actions)) = p * pi.probs(s2, a2);
        }
      }
    }
  }
  return m;
}

Vector initial_pair_dist(const TabularMdp& mdp, const Policy& pi) {
  Vector mu0(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      mu0(flat(s, a, mdp.n_actions)) = mdp.init_dist(s) * pi.probs(s, a);
    }
  }
  return mu0;
}

Matrix unflatten(const Vector& v, int n_states, int n_actions) {
  Matrix out(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) out(s, a) = v(flat(s, a, n_actions));
  }
  return out;
}

}  // namespace

Matrix discounted_visitation(const TabularMdp& mdp, const Policy& pi) {
  mdp.validate();
  pi.validate(mdp.n_states, mdp.n_actions);
  const int dim = mdp.n_states * mdp.n_actions;
  Matrix m = pair_transition(mdp, pi);
  // d = (1-gamma) sum_t gamma^t mu_t with mu_{t+1} = M^T mu_t, i.e. the
  // solution of (I - gamma M^T) d = (1-gamma) mu_0.
  Matrix system = Matrix::Identity(dim, dim) - mdp.gamma * m.transpose();
  Vector d = system.partialPivLu().solve((1.0 - mdp.gamma) * initial_pair_dist(mdp, pi));
  return unflatten(d, mdp.n_states, mdp.n_actions);
}

Matrix average_occupancy(const TabularMdp& mdp, const Policy& behavior, int horizon) {
  mdp.validate();
  behavior.validate(mdp.n_states, mdp.n_actions);
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  Matrix m = pair_transition(mdp, behavior);
  Vector mu = initial_pair_dist(mdp, behavior);
  Vector total = Vector::Zero(mu.size());
  for (int t = 0; t < horizon; ++t) {
    total += mu;
    if (t + 1 < horizon) mu = m.transpose() * mu;
  }
  total /= static_cast<double>(horizon);
  return unflatten(total, mdp.n_states, mdp.n_actions);
}

RatioTable visitation_ratio_exact(const TabularMdp& mdp, const Policy& pi,
                                  const Policy& behavior, int horizon) {
  Matrix numer = discounted_visitation(mdp, pi);
  Matrix denom = average_occupancy(mdp, behavior, horizon);
  RatioTable table;
  table.omega = Matrix::Zero(mdp.n_states, mdp.n_actions);
  table.defined.resize(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      table.defined(s, a) = denom(s, a) > 0.0;
      if (table.defined(s, a)) table.omega(s, a) = numer(s, a) / denom(s, a);
    }
  }
  return table;
}

ChunkPartition partition_dataset(const Dataset& data, int n_chunks) {
  data.validate();
  if (n_chunks < 2) throw std::invalid_argument("need at least 2 chunks");
  if (n_chunks > data.horizon) {
    throw std::invalid_argument("cannot split a horizon of " + std::to_string(data.horizon) +
                                " into " + std::to_string(n_chunks) + " chunks");
  }
  ChunkPartition part;
  part.block_width = data.horizon / n_chunks;
  part.dropped = static_cast<std::size_t>(data.n_episodes) * (data.horizon % n_chunks);
  part.chunks.resize(n_chunks);
  for (int o = 0; o < n_chunks; ++o) {
    auto& chunk = part.chunks[o];
    chunk.reserve(static_cast<std::size_t>(data.n_episodes) * part.block_width);
    for (int i = 0; i < data.n_episodes; ++i) {
      for (int t = o * part.block_width; t < (o + 1) * part.block_width; ++t) {
        chunk.push_back(static_cast<std::size_t>(i) * data.horizon + t);
      }
    }
  }
  return part;
}

}  // namespace pms
