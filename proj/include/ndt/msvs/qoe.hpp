#pragma once

#include <cmath>

#include "ndt/error.hpp"

namespace ndt::msvs {

struct QoeWeights {
  double alpha = 1.0;
  double beta = 2.0;
  double gamma = 0.5;
  double delta = 0.1;
  double bitrate_min_bps = 0.5e6;
};

/// What one user experienced in one slot.
struct SlotComponents {
  /// Bitrate of the content played; 0 for a fully stalled slot.
  double bitrate_bps = 0.0;
  double prev_bitrate_bps = 0.0;
  double rebuffer_s = 0.0;
  double waste_s = 0.0;
};

struct QoeTerms {
  double utility = 0.0;
  double rebuffer = 0.0;
  double switching = 0.0;
  double waste = 0.0;
  double total = 0.0;
};

inline void check_weights(const QoeWeights& w) {
  require(w.alpha >= 0 && w.beta >= 0 && w.gamma >= 0 && w.delta >= 0, ErrorCode::invalid_config,
          "qoe weights must be non-negative");
  require(w.bitrate_min_bps > 0, ErrorCode::invalid_config, "qoe bitrate_min must be positive");
}

inline double bitrate_utility(double bitrate_bps, const QoeWeights& w) {
  return w.alpha * std::log(1.0 + bitrate_bps / w.bitrate_min_bps);
}

/// Unweighted component magnitudes and the weighted total.
inline QoeTerms qoe_terms(const SlotComponents& c, const QoeWeights& w) {
  QoeTerms t;
  t.utility = std::log(1.0 + c.bitrate_bps / w.bitrate_min_bps);
  t.rebuffer = c.rebuffer_s;
  t.switching = (c.bitrate_bps > 0.0 && c.prev_bitrate_bps > 0.0) ? std::abs(std::log(c.bitrate_bps / c.prev_bitrate_bps)) : 0.0;
  t.waste = c.waste_s;
  t.total = w.alpha * t.utility - w.beta * t.rebuffer - w.gamma * t.switching - w.delta * t.waste;
  return t;
}

inline double qoe_slot(const SlotComponents& c, const QoeWeights& w) {
  check_weights(w);
  return qoe_terms(c, w).total;
}

}  // namespace ndt::msvs
