#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::learners {

struct Clustering {
  Eigen::MatrixXd centroids;  // k x m
  std::vector<int> assignment;
  double wcss = 0.0;
  int iterations = 0;
  /// WCSS after every Lloyd iteration.
  std::vector<double> wcss_history;

  int k() const { return static_cast<int>(centroids.rows()); }
};

inline int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x, double* dist2 = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

inline void check_k(Eigen::Index n, int k) {
  require(k >= 1 && k <= n, ErrorCode::k_out_of_range,
          "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
}

/// Candidate draws per k-means++ step: 2 + floor(ln k).
inline int default_local_trials(int k) {
  return 2 + static_cast<int>(std::log(static_cast<double>(k)));
}

/// K-means++ seeding. Rows of `points` are samples. The first centroid is
/// uniform; each further centroid is drawn with probability proportional to
/// the squared distance to the nearest chosen centroid. With local_trials > 1
/// several candidates are drawn that way and the one giving the lowest
/// potential is kept. Points at distance 0 carry no mass.
inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int k, RandomStream& rng,
                                     int local_trials = 0) {
  const auto n = points.rows();
  check_k(n, k);
  if (local_trials <= 0) local_trials = default_local_trials(k);
  const auto un = static_cast<std::size_t>(n);
  Eigen::MatrixXd centroids(k, points.cols());
  std::vector<bool> chosen(un, false);
  std::vector<double> d2(un, std::numeric_limits<double>::infinity());

  auto updated = [&](Eigen::Index idx, std::vector<double>& out) {
    double potential = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      out[ui] = std::min(d2[ui], (points.row(i) - points.row(idx)).squaredNorm());
      potential += out[ui];
    }
    return potential;
  };
  auto take = [&](Eigen::Index idx, int slot) {
    chosen[static_cast<std::size_t>(idx)] = true;
    centroids.row(slot) = points.row(idx);
    updated(idx, d2);
  };

  take(static_cast<Eigen::Index>(rng.index(un)), 0);
  std::vector<double> scratch(un);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < un; ++i)
      if (!chosen[i]) total += d2[i];
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double best_potential = std::numeric_limits<double>::infinity();
      for (int t = 0; t < local_trials; ++t) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        Eigen::Index cand = -1;
        for (std::size_t i = 0; i < un; ++i) {
          if (chosen[i] || d2[i] <= 0.0) continue;
          acc += d2[i];
          cand = static_cast<Eigen::Index>(i);
          if (u < acc) break;
        }
        const double potential = updated(cand, scratch);
        if (potential < best_potential) {
          best_potential = potential;
          pick = cand;
        }
      }
    } else {
      // Only duplicates of chosen points remain: pick uniformly among unchosen.
      std::vector<Eigen::Index> rest;
      for (std::size_t i = 0; i < un; ++i)
        if (!chosen[i]) rest.push_back(static_cast<Eigen::Index>(i));
      pick = rest[rng.index(rest.size())];
    }
    take(pick, c);
  }
  return centroids;
}

inline double compute_wcss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                           const std::vector<int>& assignment) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    w += (points.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  return w;
}

/// Lloyd iterations from a k-means++ seed until the assignment is a fixpoint
/// or `max_iterations` is reached.
inline Clustering kmeans_cluster(const Eigen::MatrixXd& points, int k, RandomStream& rng,
                                 int max_iterations = 100) {
  const auto n = points.rows();
  check_k(n, k);
  Clustering out;
  out.centroids = kmeanspp_seed(points, k, rng);
  out.assignment.assign(static_cast<std::size_t>(n), -1);

  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    std::vector<double> own_d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_centroid(out.centroids, points.row(i).transpose(), &own_d2[static_cast<std::size_t>(i)]);
      if (c != out.assignment[static_cast<std::size_t>(i)]) {
        out.assignment[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    if (!changed) break;
    out.iterations = it + 1;

    // Running means: identical members give their exact value.
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = out.assignment[static_cast<std::size_t>(i)];
      const int cnt = ++counts[static_cast<std::size_t>(c)];
      means.row(c) += (points.row(i) - means.row(c)) / cnt;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centroids.row(c) = means.row(c);
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its centroid.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (own_d2[static_cast<std::size_t>(i)] > far_d) {
          far_d = own_d2[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      out.centroids.row(c) = points.row(far);
      own_d2[static_cast<std::size_t>(far)] = 0.0;
    }
    out.wcss_history.push_back(compute_wcss(points, out.centroids, out.assignment));
  }
  out.wcss = compute_wcss(points, out.centroids, out.assignment);
  return out;
}

/// Soft assignment: softmax of -distance / temperature over centroids.
inline Eigen::VectorXd soft_assignment(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x,
                                       double temperature) {
  require(temperature > 0.0, ErrorCode::invalid_argument, "soft_assignment: temperature must be > 0");
  Eigen::VectorXd logits(centroids.rows());
  for (Eigen::Index c = 0; c < centroids.rows(); ++c)
    logits[c] = -(centroids.row(c).transpose() - x).norm() / temperature;
  const double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp().matrix();
  return p / p.sum();
}

/// Centroid-silhouette cohesion in [-1, 1]: mean of (b - a) / max(a, b) where
/// a is the distance to the own centroid and b to the nearest other one.
inline double cohesion_score(const Eigen::MatrixXd& points, const Clustering& cl) {
  if (cl.k() < 2) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int own = cl.assignment[static_cast<std::size_t>(i)];
    const double a = (points.row(i) - cl.centroids.row(own)).norm();
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < cl.k(); ++c)
      if (c != own) b = std::min(b, (points.row(i) - cl.centroids.row(c)).norm());
    const double den = std::max(a, b);
    total += den > 0.0 ? (b - a) / den : 0.0;
  }
  return total / static_cast<double>(points.rows());
}

}  // namespace ndt::learners
