#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "ndt/learners/qagent.hpp"
#include "ndt/learners/snapshot.hpp"

using namespace ndt;
using namespace ndt::learners;

TEST(QAgent, GreedyPicksDominantEntry) {
  QAgent q(4, 7, {0.0, 0.1, 0.0});
  q.table_a()(2, 5) = 3.0;
  q.table_b()(2, 5) = 1.0;
  ClusterCountPolicy policy{2, 8, 2};
  auto rng = rng_stream(1, "agent-explore");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_cluster_count(q, policy, 2, rng), 7);
}

TEST(QAgent, FullExplorationIsUniform) {
  QAgent q(1, 7, {1.0, 0.1, 0.0});
  q.table_a()(0, 3) = 100;
  auto rng = rng_stream(2, "agent-explore");
  const int n = 10000;
  std::array<int, 7> counts{};
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(q.select(0, rng))];
  const double p = 1.0 / 7, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, n * p, 3 * sd);
}

TEST(QAgent, TiesGoToLowestAction) {
  QAgent q(2, 5, {0.0, 0.1, 0.0});
  ClusterCountPolicy policy{2, 6, 1};
  auto rng = rng_stream(3, "agent-explore");
  EXPECT_EQ(select_cluster_count(q, policy, 0, rng), 2);
  q.table_a()(1, 2) = 1;
  q.table_a()(1, 4) = 1;
  EXPECT_EQ(q.greedy(1), 2);
}

TEST(QAgent, UnitStepFromZeroSetsEntryToReward) {
  QAgent q(2, 2, {0.0, 1.0, 0.0});
  auto rng = rng_stream(4, "agent-explore");
  q_update(q, 0, 1, 1.0, 1, rng);
  const double a = q.table_a()(0, 1), b = q.table_b()(0, 1);
  EXPECT_TRUE((a == 1.0 && b == 0.0) || (a == 0.0 && b == 1.0));
}

TEST(QAgent, ZeroRewardsKeepZeroTables) {
  QAgent q(3, 3, {0.5, 0.5, 0.9});
  auto rng = rng_stream(5, "agent-explore");
  for (int i = 0; i < 5000; ++i) {
    const int s = static_cast<int>(rng.index(3));
    q_update(q, s, q.select(s, rng), 0.0, static_cast<int>(rng.index(3)), rng);
  }
  EXPECT_EQ(q.table_a().norm(), 0.0);
  EXPECT_EQ(q.table_b().norm(), 0.0);
}

TEST(QAgent, EntriesStayWithinRewardBound) {
  const double r_max = 2.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = rng_stream(seed, "agent-explore");
    const double gamma = rng.uniform(0.0, 0.95);
    const double alpha = rng.uniform(0.01, 1.0);
    QAgent q(4, 3, {0.3, alpha, gamma});
    for (int i = 0; i < 5000; ++i) {
      const int s = static_cast<int>(rng.index(4));
      q_update(q, s, q.select(s, rng), rng.uniform(0, r_max), static_cast<int>(rng.index(4)), rng);
    }
    const double bound = r_max / (1 - gamma) + 1e-9;
    for (const auto* t : {&q.table_a(), &q.table_b()}) {
      EXPECT_GE(t->minCoeff(), 0.0);
      EXPECT_LE(t->maxCoeff(), bound);
    }
  }
}

// Two-state, two-action MDP. Action a moves to state a with probability 0.8,
// otherwise to the other state; rewards are Bernoulli with the given means.
// The greedy policy after 1e4 off-policy updates is compared with the policy
// from value iteration on the exact model.
TEST(QAgent, MatchesValueIterationOnTwoStateMdp) {
  const double gamma = 0.9;
  const double mean_r[2][2] = {{0.1, 0.0}, {0.0, 0.6}};
  const double p_intended = 0.8;
  auto p_next = [&](int a, int s_next) { return s_next == a ? p_intended : 1 - p_intended; };

  double v[2] = {0, 0}, qv[2][2] = {};
  for (int it = 0; it < 2000; ++it) {
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        qv[s][a] = mean_r[s][a] + gamma * (p_next(a, 0) * v[0] + p_next(a, 1) * v[1]);
    for (int s = 0; s < 2; ++s) v[s] = std::max(qv[s][0], qv[s][1]);
  }
  const int optimal[2] = {qv[0][1] > qv[0][0] ? 1 : 0, qv[1][1] > qv[1][0] ? 1 : 0};

  int matches = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = rng_stream(seed, "mdp");
    QAgent q(2, 2, {1.0, 0.05, gamma});
    int s = 0;
    for (int i = 0; i < 10000; ++i) {
      const int a = q.select(s, rng);
      const int s_next = rng.uniform() < p_intended ? a : 1 - a;
      const double r = rng.uniform() < mean_r[s][a] ? 1.0 : 0.0;
      q_update(q, s, a, r, s_next, rng);
      s = s_next;
    }
    matches += q.greedy(0) == optimal[0] && q.greedy(1) == optimal[1];
  }
  EXPECT_GE(matches, 9);
}

TEST(QAgent, SnapshotRoundTrip) {
  QAgent q(2, 3, {0.2, 0.3, 0.4});
  q.table_a()(1, 2) = 0.5;
  q.table_b()(0, 1) = -0.25;
  auto back = qagent_from_snapshot(nlohmann::json::parse(to_snapshot(q).dump()));
  EXPECT_EQ(back.table_a(), q.table_a());
  EXPECT_EQ(back.table_b(), q.table_b());
  EXPECT_EQ(back.hyper().gamma, 0.4);
}

TEST(QAgent, RejectsBadEpsilon) {
  EXPECT_THROW(QAgent(1, 1, {1.5, 0.1, 0.0}), Error);
}
