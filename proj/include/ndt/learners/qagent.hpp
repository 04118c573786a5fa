#pragma once

#include <Eigen/Dense>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::learners {

struct QHyper {
  double epsilon = 0.1;
  double alpha = 0.2;
  double gamma = 0.0;
};

/// Tabular double Q-learning agent with two estimators.
class QAgent {
 public:
  QAgent() = default;
  QAgent(int states, int actions, QHyper hyper)
      : a_(Eigen::MatrixXd::Zero(states, actions)),
        b_(Eigen::MatrixXd::Zero(states, actions)),
        hyper_(hyper) {
    require(states > 0 && actions > 0, ErrorCode::invalid_argument, "QAgent: empty state or action set");
    require(hyper.epsilon >= 0.0 && hyper.epsilon <= 1.0, ErrorCode::invalid_argument,
            "QAgent: epsilon must be in [0, 1]");
  }

  int states() const { return static_cast<int>(a_.rows()); }
  int actions() const { return static_cast<int>(a_.cols()); }
  const QHyper& hyper() const { return hyper_; }
  QHyper& hyper() { return hyper_; }
  const Eigen::MatrixXd& table_a() const { return a_; }
  const Eigen::MatrixXd& table_b() const { return b_; }
  Eigen::MatrixXd& table_a() { return a_; }
  Eigen::MatrixXd& table_b() { return b_; }

  /// Greedy action over the averaged tables; ties go to the lowest index.
  int greedy(int s) const {
    check_state(s);
    return argmax_row(a_ + b_, s);
  }

  /// Epsilon-greedy; consumes one draw, plus one more when exploring.
  int select(int s, RandomStream& rng) const {
    check_state(s);
    if (rng.uniform() < hyper_.epsilon) return static_cast<int>(rng.index(static_cast<std::size_t>(actions())));
    return greedy(s);
  }

  /// Double-estimator update. With probability 1/2 table A moves towards
  /// r + gamma * B(s', argmax A(s', .)), otherwise the roles swap.
  void update(int s, int a, double reward, int s_next, RandomStream& rng) {
    check_state(s);
    check_state(s_next);
    require(a >= 0 && a < actions(), ErrorCode::invalid_argument, "QAgent::update: action out of range");
    const bool update_a = rng.uniform() < 0.5;
    Eigen::MatrixXd& self = update_a ? a_ : b_;
    const Eigen::MatrixXd& other = update_a ? b_ : a_;
    const int best = argmax_row(self, s_next);
    const double target = reward + hyper_.gamma * other(s_next, best);
    self(s, a) += hyper_.alpha * (target - self(s, a));
  }

 private:
  void check_state(int s) const {
    require(s >= 0 && s < states(), ErrorCode::invalid_argument, "QAgent: state out of range");
  }

  static int argmax_row(const Eigen::MatrixXd& m, int s) {
    int best = 0;
    for (int a = 1; a < m.cols(); ++a)
      if (m(s, a) > m(s, best)) best = a;
    return best;
  }

  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  QHyper hyper_;
};

inline void q_update(QAgent& agent, int s, int a, double reward, int s_next, RandomStream& rng) {
  agent.update(s, a, reward, s_next, rng);
}

/// Cluster-count agent: action i corresponds to k = k_min + i.
struct ClusterCountPolicy {
  int k_min = 2;
  int k_max = 8;
  /// Quantization grid of the latent summary.
  int grid = 8;

  int actions() const { return k_max - k_min + 1; }
  int states() const { return grid * grid; }
};

inline int select_cluster_count(const QAgent& agent, const ClusterCountPolicy& policy, int state,
                                RandomStream& rng) {
  return policy.k_min + agent.select(state, rng);
}

}  // namespace ndt::learners
