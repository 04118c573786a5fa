#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/physnet.hpp"

namespace ndt::twin {

inline double labeled_error(std::span<const double> pred, std::span<const double> actual) {
  require(pred.size() == actual.size(), ErrorCode::dim_mismatch,
          "labeled_error: " + std::to_string(pred.size()) + " vs " + std::to_string(actual.size()));
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double unlabeled_error(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    require(p >= 0.0 && std::isfinite(p), ErrorCode::not_a_distribution, "unlabeled_error: negative or non-finite mass");
    sum += p;
  }
  require(!probs.empty() && std::abs(sum - 1.0) <= 1e-6, ErrorCode::not_a_distribution,
          "unlabeled_error: probabilities sum to " + std::to_string(sum));
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

struct DualErrorDetector {
  double theta_labeled = 1.0;
  double theta_unlabeled = 5.0 * std::log(8.0);
  double labeled_acc = 0.0;
  double unlabeled_acc = 0.0;
  std::size_t window = 16;
  std::deque<double> recent_labeled;
  std::deque<double> recent_unlabeled;
  int triggers = 0;
};

struct AccumulateResult {
  bool triggered = false;
  bool labeled = false;
  bool unlabeled = false;
};

namespace detail {

// Strict comparison that ignores rounding in the last few ulps, so that n
// equal increments reach n times their value exactly.
inline bool exceeds(double acc, double theta) {
  return acc > theta + 1e-12 * std::max(1.0, std::abs(theta));
}

inline void push_bounded(std::deque<double>& d, double v, std::size_t cap) {
  d.push_back(v);
  while (d.size() > cap) d.pop_front();
}

}  // namespace detail

inline AccumulateResult accumulate_error(DualErrorDetector& det, std::optional<double> labeled,
                                         std::optional<double> unlabeled) {
  require(labeled.has_value() || unlabeled.has_value(), ErrorCode::invalid_argument,
          "accumulate_error: no error supplied");
  if (labeled) {
    require(*labeled >= 0.0, ErrorCode::invalid_argument, "accumulate_error: negative labeled error");
    det.labeled_acc += *labeled;
    detail::push_bounded(det.recent_labeled, *labeled, det.window);
  }
  if (unlabeled) {
    require(*unlabeled >= 0.0, ErrorCode::invalid_argument, "accumulate_error: negative entropy");
    det.unlabeled_acc += *unlabeled;
    detail::push_bounded(det.recent_unlabeled, *unlabeled, det.window);
  }
  AccumulateResult r;
  r.labeled = detail::exceeds(det.labeled_acc, det.theta_labeled);
  r.unlabeled = detail::exceeds(det.unlabeled_acc, det.theta_unlabeled);
  r.triggered = r.labeled || r.unlabeled;
  if (r.triggered) {
    det.labeled_acc = 0.0;
    det.unlabeled_acc = 0.0;
    ++det.triggers;
  }
  return r;
}

struct CollectionParams {
  int p_min = 1;
  int p_max = 32;
  int initial = 8;
  double theta_hi = 0.2;
  double theta_lo = 0.02;
};

inline int adjust_collection_period(int period, double recent_mse, const CollectionParams& p) {
  require(period >= p.p_min && period <= p.p_max, ErrorCode::invalid_argument,
          "adjust_collection_period: period " + std::to_string(period) + " outside bounds");
  int next = period;
  if (recent_mse > p.theta_hi)
    next = period / 2;
  else if (recent_mse < p.theta_lo)
    next = period * 2;
  return std::clamp(next, p.p_min, p.p_max);
}

/// Edges 0, width, 2 width, ... up to max_s.
inline std::vector<double> uniform_bins(double width_s, double max_s) {
  std::vector<double> edges;
  for (double e = 0.0; e < max_s + 0.5 * width_s; e += width_s) edges.push_back(e);
  return edges;
}

/// Normalized histogram of watched durations. Durations below the first edge
/// go to the first bin and those at or above the last edge to the last bin.
inline std::vector<double> swipe_distribution(std::span<const physnet::SwipeEvent> events,
                                              std::span<const double> edges) {
  require(edges.size() >= 2, ErrorCode::bad_bins, "swipe_distribution: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    require(edges[i] > edges[i - 1], ErrorCode::bad_bins, "swipe_distribution: edges not strictly increasing");
  const std::size_t nb = edges.size() - 1;
  std::vector<double> h(nb, 0.0);
  if (events.empty()) {
    std::fill(h.begin(), h.end(), 1.0 / static_cast<double>(nb));
    return h;
  }
  for (const auto& e : events) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), e.watched_duration);
    auto b = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(nb) - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(events.size());
  return h;
}

/// Mass of the histogram in bins lying entirely below `limit_s`.
inline double mass_below(std::span<const double> hist, std::span<const double> edges, double limit_s) {
  double m = 0.0;
  for (std::size_t b = 0; b < hist.size(); ++b)
    if (edges[b + 1] <= limit_s) m += hist[b];
  return m;
}

}  // namespace ndt::twin
