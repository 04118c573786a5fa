#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/learners/qagent.hpp"
#include "ndt/twin/replay.hpp"

namespace ndt::twin {

struct SliceDemand {
  /// Snapshot of the MSVS groups under their current quota.
  std::optional<ReplaySnapshot> msvs;
  double background_hz = 0.0;
};

struct SliceConfig {
  /// Index 0 is the MSVS slice, index 1 the background slice when present.
  std::vector<double> quotas_hz;
  double msvs_share = 1.0;
  ValidationReport validation;
};

struct SdtParams {
  std::vector<double> share_actions{0.5, 0.6, 0.7, 0.8, 0.9};
  double initial_share = 0.7;
  /// Objective weight of the served fraction of background demand.
  double background_weight = 2.0;
  std::size_t satisfaction_window = 20;
  int replay_horizon = 5;
  double qoe_max = 10.0;
  int demand_states = 4;
  int satisfaction_states = 4;
  learners::QHyper agent{0.1, 0.2, 0.0};
  bool background_slice = true;
};

struct SliceDigitalTwin {
  SdtParams params;
  double total_hz = 0.0;
  double incumbent_share = 0.7;
  std::deque<double> recent_qoe;
  learners::QAgent agent;
  int last_state = 0;
  int last_action = 0;
};

inline SliceDigitalTwin make_sdt(double total_hz, const SdtParams& p = {}) {
  SliceDigitalTwin s;
  s.params = p;
  s.total_hz = total_hz;
  s.incumbent_share = p.background_slice ? p.initial_share : 1.0;
  s.agent = learners::QAgent(p.demand_states * p.satisfaction_states, static_cast<int>(p.share_actions.size()), p.agent);
  const auto it = std::find(p.share_actions.begin(), p.share_actions.end(), p.initial_share);
  s.last_action = it == p.share_actions.end() ? 0 : static_cast<int>(it - p.share_actions.begin());
  return s;
}

/// Trailing mean QoE, clamped to [0, qoe_max].
inline double satisfaction(const SliceDigitalTwin& s) {
  if (s.recent_qoe.empty()) return 0.0;
  double m = 0.0;
  for (double q : s.recent_qoe) m += q;
  m /= static_cast<double>(s.recent_qoe.size());
  return std::clamp(m, 0.0, s.params.qoe_max);
}

inline void sdt_observe(SliceDigitalTwin& s, double msvs_qoe) {
  s.recent_qoe.push_back(msvs_qoe);
  while (s.recent_qoe.size() > s.params.satisfaction_window) s.recent_qoe.pop_front();
}

inline int sdt_state(const SliceDigitalTwin& s, const SliceDemand& d) {
  const double bg = s.total_hz > 0.0 ? d.background_hz / s.total_hz : 0.0;
  const int a = std::clamp(static_cast<int>(bg / 0.125), 0, s.params.demand_states - 1);
  const double sat = satisfaction(s) / s.params.qoe_max;
  const int b = std::clamp(static_cast<int>(sat * s.params.satisfaction_states), 0, s.params.satisfaction_states - 1);
  return a * s.params.satisfaction_states + b;
}

/// Replay objective of one MSVS share: mean MSVS QoE at that quota plus the
/// weighted served fraction of background demand.
inline double slice_objective(const SliceDigitalTwin& s, const SliceDemand& d, double share, RandomStream rng) {
  double v = 0.0;
  if (d.msvs) {
    ReplaySnapshot snap = *d.msvs;
    snap.quota_hz = share * s.total_hz;
    v += replay_mean_qoe(snap, {}, s.params.replay_horizon, rng);
  }
  if (s.params.background_slice && d.background_hz > 0.0)
    v += s.params.background_weight * std::min(1.0, (1.0 - share) * s.total_hz / d.background_hz);
  return v;
}

inline SliceConfig slice_config(const SliceDigitalTwin& s, double share) {
  SliceConfig c;
  c.msvs_share = share;
  if (!s.params.background_slice) {
    c.quotas_hz = {s.total_hz};
    c.msvs_share = 1.0;
  } else {
    const double msvs = share * s.total_hz;
    c.quotas_hz = {msvs, s.total_hz - msvs};
  }
  return c;
}

/// Agent proposes a share; it replaces the incumbent only when the replay
/// accepts it. Quotas always sum to the total.
inline SliceConfig slice_allocate(SliceDigitalTwin& s, const SliceDemand& d, RandomStream& rng,
                                  const RandomStream& replay_rng) {
  if (!s.params.background_slice) return slice_config(s, 1.0);
  s.last_state = sdt_state(s, d);
  const int a = s.agent.select(s.last_state, rng);
  const double cand = s.params.share_actions[static_cast<std::size_t>(a)];
  const auto report = validate_with([&](bool c) { return slice_objective(s, d, c ? cand : s.incumbent_share, replay_rng); });
  if (report.accepted) {
    s.incumbent_share = cand;
    s.last_action = a;
  }
  auto cfg = slice_config(s, s.incumbent_share);
  cfg.validation = report;
  return cfg;
}

inline void sdt_feedback(SliceDigitalTwin& s, double reward, const SliceDemand& d, RandomStream& rng) {
  if (!s.params.background_slice) return;
  s.agent.update(s.last_state, s.last_action, reward, sdt_state(s, d), rng);
}

}  // namespace ndt::twin
