#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/learners/qagent.hpp"
#include "ndt/physnet.hpp"
#include "ndt/twin/detector.hpp"
#include "ndt/twin/replay.hpp"

namespace ndt::twin {

struct StationReport {
  int id = 0;
  double load = 0.0;
  double bandwidth_hz = 0.0;
  double tx_power_dbm = 0.0;
};

struct StationMirror {
  int id = 0;
  physnet::Vec2 position;
  double bandwidth_hz = 0.0;
  double tx_power_dbm = 0.0;
  double load = 0.0;
  int last_report_slot = -1;
};

struct TrafficSummary {
  double mean = 0.0;
  double peak = 0.0;
  double slope = 0.0;
};

/// Least-squares slope of y against 0, 1, ..., n-1.
inline double trend_slope(std::span<const double> y) {
  const auto n = static_cast<double>(y.size());
  if (y.size() < 2) return 0.0;
  const double xm = (n - 1.0) / 2.0;
  double ym = 0.0;
  for (double v : y) ym += v;
  ym /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dx = static_cast<double>(i) - xm;
    sxy += dx * (y[i] - ym);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline TrafficSummary summarize(std::span<const double> y) {
  TrafficSummary s;
  if (y.empty()) return s;
  for (double v : y) s.mean += v;
  s.mean /= static_cast<double>(y.size());
  s.peak = *std::max_element(y.begin(), y.end());
  s.slope = trend_slope(y);
  return s;
}

struct IdtParams {
  std::size_t load_window = 20;
  std::size_t replay_buffer = 8;
  /// Scale of the load prediction error.
  double load_scale = 10.0;
  double theta_labeled = 1.0;
  std::vector<double> eta_actions{0.0, 0.5, 1.0};
  int load_states = 4;
  learners::QHyper agent{0.1, 0.2, 0.0};
};

struct InfrastructureDigitalTwin {
  IdtParams params;
  std::vector<StationMirror> stations;
  std::vector<std::deque<double>> load_history;
  std::vector<TrafficSummary> summary;
  DualErrorDetector detector;
  learners::QAgent agent;
  std::deque<ReplaySnapshot> replay;
  SplitPolicy incumbent;
  int last_state = 0;
  int last_action = 2;
};

inline InfrastructureDigitalTwin make_idt(std::span<const physnet::BaseStation> bs, const IdtParams& p = {}) {
  InfrastructureDigitalTwin t;
  t.params = p;
  for (const auto& s : bs) t.stations.push_back({s.id, s.position, s.bandwidth_hz, s.tx_power_dbm, 0.0, -1});
  t.load_history.resize(t.stations.size());
  t.summary.resize(t.stations.size());
  t.detector.theta_labeled = p.theta_labeled;
  t.detector.theta_unlabeled = std::numeric_limits<double>::infinity();
  t.agent = learners::QAgent(p.load_states, static_cast<int>(p.eta_actions.size()), p.agent);
  t.last_action = static_cast<int>(p.eta_actions.size()) - 1;
  t.incumbent.eta = p.eta_actions.back();
  return t;
}

struct MirrorUpdate {
  std::optional<double> labeled_error;
  AccumulateResult detector;
};

/// Mirrors the reported station state. The load error is the mean squared
/// gap between the trend extrapolation of each reported station and its new
/// load, in units of load_scale.
inline MirrorUpdate idt_mirror_update(InfrastructureDigitalTwin& t, std::span<const StationReport> report, int slot) {
  MirrorUpdate out;
  double err = 0.0;
  int predicted = 0;
  for (const auto& r : report) {
    auto it = std::find_if(t.stations.begin(), t.stations.end(), [&](const StationMirror& m) { return m.id == r.id; });
    require(it != t.stations.end(), ErrorCode::unknown_station, "idt_mirror_update: station " + std::to_string(r.id));
    const auto i = static_cast<std::size_t>(it - t.stations.begin());
    auto& hist = t.load_history[i];
    if (!hist.empty()) {
      const auto& s = t.summary[i];
      const double n = static_cast<double>(hist.size());
      const double forecast = s.mean + s.slope * (n - 1.0) / 2.0 + s.slope;
      const double d = (forecast - r.load) / t.params.load_scale;
      err += d * d;
      ++predicted;
    }
    it->load = r.load;
    it->bandwidth_hz = r.bandwidth_hz;
    it->tx_power_dbm = r.tx_power_dbm;
    it->last_report_slot = slot;
    hist.push_back(r.load);
    while (hist.size() > t.params.load_window) hist.pop_front();
    const std::vector<double> y(hist.begin(), hist.end());
    t.summary[i] = summarize(y);
  }
  if (predicted > 0) {
    out.labeled_error = err / predicted;
    out.detector = accumulate_error(t.detector, out.labeled_error, std::nullopt);
  }
  return out;
}

inline void idt_record_snapshot(InfrastructureDigitalTwin& t, ReplaySnapshot snap) {
  t.replay.push_back(std::move(snap));
  while (t.replay.size() > t.params.replay_buffer) t.replay.pop_front();
}

/// Load state: imbalance between the busiest station and the mean, bucketed.
inline int idt_state(const InfrastructureDigitalTwin& t) {
  double mean = 0.0;
  double peak = 0.0;
  for (const auto& s : t.stations) {
    mean += s.load;
    peak = std::max(peak, s.load);
  }
  if (t.stations.empty() || mean <= 0.0) return 0;
  mean /= static_cast<double>(t.stations.size());
  const double ratio = peak / mean;  // in [1, stations]
  const int b = static_cast<int>((ratio - 1.0) / 0.25);
  return std::clamp(b, 0, t.params.load_states - 1);
}

struct OperationDecision {
  SplitPolicy policy;
  ValidationReport validation;
  bool explored = false;
};

/// Proposes a split exponent from the agent and deploys it only if the replay
/// on the latest mirrored snapshot accepts it against the incumbent.
inline OperationDecision idt_operate(InfrastructureDigitalTwin& t, int horizon, RandomStream& explore,
                                     const RandomStream& replay_rng) {
  OperationDecision d;
  t.last_state = idt_state(t);
  const int a = t.agent.select(t.last_state, explore);
  SplitPolicy cand = t.incumbent;
  cand.eta = t.params.eta_actions[static_cast<std::size_t>(a)];
  d.explored = a != t.agent.greedy(t.last_state);
  d.validation = validate_policy(t.replay, cand, t.incumbent, horizon, replay_rng);
  if (d.validation.accepted) {
    t.incumbent = cand;
    t.last_action = a;
  }
  d.policy = t.incumbent;
  return d;
}

inline void idt_feedback(InfrastructureDigitalTwin& t, double reward, RandomStream& rng) {
  t.agent.update(t.last_state, t.last_action, reward, idt_state(t), rng);
}

}  // namespace ndt::twin
