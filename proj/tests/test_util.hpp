#pragma once

// Test-only oracles shared by the unit and acceptance suites.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "ndt/rng.hpp"

namespace ndt::oracle {

/// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (auto& [k, v] : joint) sum_joint += c2(v);
  for (auto& [k, v] : ca) sum_a += c2(v);
  for (auto& [k, v] : cb) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

/// Isotropic Gaussian blobs on a line with the given separation in units of sigma.
inline Eigen::MatrixXd planted_blobs(int per_blob, int blobs, int dim, double separation_sigma,
                                     RandomStream& rng, std::vector<int>& labels) {
  Eigen::MatrixXd pts(per_blob * blobs, dim);
  labels.clear();
  for (int b = 0; b < blobs; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      const int row = b * per_blob + i;
      for (int d = 0; d < dim; ++d) pts(row, d) = rng.normal() + (d == 0 ? b * separation_sigma : 0.0);
      labels.push_back(b);
    }
  }
  return pts;
}

/// Best rank-m projection error (mean over entries) from the eigendecomposition
/// of X^T X; this is the optimum for a linear map through the origin.
inline double rank_projection_error(const Eigen::MatrixXd& data, int m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(data.transpose() * data);
  const auto& ev = es.eigenvalues();  // ascending
  double rest = 0.0;
  for (Eigen::Index i = 0; i < ev.size() - m; ++i) rest += std::max(0.0, ev[i]);
  return rest / static_cast<double>(data.size());
}

}  // namespace ndt::oracle
