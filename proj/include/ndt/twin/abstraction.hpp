#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ndt/learners/autoencoder.hpp"
#include "ndt/learners/kmeans.hpp"
#include "ndt/learners/qagent.hpp"
#include "ndt/twin/detector.hpp"
#include "ndt/twin/udt.hpp"

namespace ndt::twin {

struct AbstractionOptions {
  int latent_dim = 4;
  learners::ClusterCountPolicy policy;
  learners::AutoencoderHyper autoencoder;
  /// Retrain the autoencoder incrementally on the current features.
  bool update_autoencoder = true;
  /// Replay every candidate k through the agent before choosing.
  bool warmup = true;
  /// Reuse this k instead of asking the agent (0 = ask).
  int fixed_k = 0;
  /// Swipe events older than this slot are ignored for histograms.
  int events_since = std::numeric_limits<int>::min();
  std::vector<double> bin_edges = uniform_bins(2.0, 60.0);
};

struct AbstractionResult {
  std::vector<std::vector<int>> groups;
  std::vector<int> assignment;
  std::vector<std::vector<double>> swipe_dists;
  std::vector<double> entropies;
  learners::Clustering clustering;
  Eigen::MatrixXd latents;
  double temperature = 1.0;
  int k = 1;
  int agent_state = 0;
};

/// Behavior features of the latest record of every twin, in normalized
/// units: [channel gain, watch ratio, preference...]. Rows are users.
inline Eigen::MatrixXd behavior_features(std::span<const UserDigitalTwin> twins) {
  if (twins.empty()) return {};
  const Vector first = status_vector(twins.front().latest());
  const Vector scale = twins.front().scales.vector(static_cast<int>(first.size()) - 4);
  Eigen::MatrixXd f(static_cast<Eigen::Index>(twins.size()), first.size() - 2);
  for (std::size_t i = 0; i < twins.size(); ++i) {
    const Vector v = status_vector(twins[i].latest()).cwiseQuotient(scale);
    f.row(static_cast<Eigen::Index>(i)) = v.tail(v.size() - 2).transpose();
  }
  return f;
}

/// Agent state from the population size and the latent spread.
inline int abstraction_state(const Eigen::MatrixXd& latents, int grid) {
  const double n = static_cast<double>(latents.rows());
  double spread = 0.0;
  if (latents.rows() > 1) {
    const Eigen::RowVectorXd mean = latents.colwise().mean();
    spread = (latents.rowwise() - mean).squaredNorm() / n;
  }
  const int a = std::min(grid - 1, static_cast<int>(std::log2(1.0 + n / 8.0)));
  const int b = std::min(grid - 1, static_cast<int>(std::log2(1.0 + spread)));
  return a * grid + b;
}

/// Median distance from each latent to its nearest centroid, floored.
inline double soft_temperature(const Eigen::MatrixXd& latents, const learners::Clustering& cl) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(latents.rows()));
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    double d2 = 0.0;
    learners::nearest_centroid(cl.centroids, latents.row(i).transpose(), &d2);
    d.push_back(std::sqrt(d2));
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return std::max(d[d.size() / 2], 1e-3);
}

inline double assignment_entropy(const learners::Clustering& cl, const Eigen::VectorXd& latent, double temperature) {
  if (cl.k() <= 1) return 0.0;
  const Eigen::VectorXd p = learners::soft_assignment(cl.centroids, latent, temperature);
  return unlabeled_error({p.data(), static_cast<std::size_t>(p.size())});
}

/// Collected swipe events of the given twins from slot `since` on.
inline std::vector<physnet::SwipeEvent> group_events(std::span<const UserDigitalTwin> twins,
                                                     std::span<const int> members, int since) {
  std::vector<physnet::SwipeEvent> out;
  for (int m : members)
    for (const auto& r : twins[static_cast<std::size_t>(m)].records)
      if (r.source == Source::collected)
        for (const auto& e : r.behavior.swipes)
          if (e.slot >= since) out.push_back(e);
  return out;
}

inline std::vector<std::vector<int>> groups_from_assignment(std::span<const int> assignment, int k) {
  std::vector<std::vector<int>> g(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < assignment.size(); ++i) g[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
  std::erase_if(g, [](const auto& v) { return v.empty(); });
  return g;
}

/// Encode behavior, choose k, cluster, and summarize each group's swipes.
/// The autoencoder is trained on first use and updated when asked to.
inline AbstractionResult abstract_features(std::span<const UserDigitalTwin> twins, learners::QAgent& agent,
                                           learners::Autoencoder& ae, RandomStream& rng,
                                           const AbstractionOptions& opt = {}) {
  AbstractionResult out;
  const auto n = static_cast<int>(twins.size());
  if (n == 0) return out;
  const Eigen::MatrixXd features = behavior_features(twins);
  const int m = std::min<int>(opt.latent_dim, static_cast<int>(features.cols()) - 1);
  if (ae.encoder.size() == 0 && n >= m) {
    ae = learners::train_autoencoder(features, m, rng.split("autoencoder"), opt.autoencoder);
  } else if (opt.update_autoencoder && ae.encoder.size() != 0) {
    ae = learners::update_autoencoder(std::move(ae), features, opt.autoencoder);
  }
  out.latents = ae.encoder.size() != 0 ? Eigen::MatrixXd(features * ae.encoder.transpose()) : features;

  const auto& pol = opt.policy;
  out.agent_state = abstraction_state(out.latents, pol.grid);
  const int k_hi = std::min(pol.k_max, n);
  if (opt.fixed_k > 0) {
    out.k = std::min(opt.fixed_k, n);
  } else if (n < pol.k_min) {
    out.k = n;
  } else {
    if (opt.warmup) {
      for (int k = pol.k_min; k <= k_hi; ++k) {
        auto probe = rng.split("warmup-" + std::to_string(k));
        const auto cl = learners::kmeans_cluster(out.latents, k, probe);
        agent.update(out.agent_state, k - pol.k_min, learners::cohesion_score(out.latents, cl), out.agent_state, rng);
      }
    }
    const bool seen = (agent.table_a().row(out.agent_state).array() != 0.0).any() ||
                      (agent.table_b().row(out.agent_state).array() != 0.0).any();
    out.k = seen ? learners::select_cluster_count(agent, pol, out.agent_state, rng) : pol.k_min;
    out.k = std::min(out.k, k_hi);
  }

  auto km = rng.split("kmeans");
  out.clustering = learners::kmeans_cluster(out.latents, out.k, km);
  out.temperature = soft_temperature(out.latents, out.clustering);

  // Compact group ids in order of first appearance in the centroid list.
  out.groups = groups_from_assignment(out.clustering.assignment, out.k);
  out.assignment.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t g = 0; g < out.groups.size(); ++g)
    for (int u : out.groups[g]) out.assignment[static_cast<std::size_t>(u)] = static_cast<int>(g);

  for (const auto& members : out.groups) {
    const auto ev = group_events(twins, members, opt.events_since);
    out.swipe_dists.push_back(swipe_distribution(ev, opt.bin_edges));
  }
  out.entropies.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.entropies.push_back(assignment_entropy(out.clustering, out.latents.row(i).transpose(), out.temperature));
  return out;
}

}  // namespace ndt::twin
