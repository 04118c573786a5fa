#pragma once

// Time-slotted simulation kernel: clock, phase sequence, event log, report.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "ndt/error.hpp"

namespace ndt::sim {

enum class Phase { collect, twin_predict, detect, abstract, operate, slice, deliver, account };

inline constexpr std::array<Phase, 8> kPhaseOrder{Phase::collect, Phase::twin_predict, Phase::detect,
                                                  Phase::abstract, Phase::operate, Phase::slice,
                                                  Phase::deliver, Phase::account};

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::collect: return "collect";
    case Phase::twin_predict: return "twin-predict";
    case Phase::detect: return "detect";
    case Phase::abstract: return "abstract";
    case Phase::operate: return "operate";
    case Phase::slice: return "slice";
    case Phase::deliver: return "deliver";
    case Phase::account: return "account";
  }
  return "?";
}

struct SimConfig {
  std::uint64_t seed = 1;
  int horizon = 200;
  double slot_duration_s = 1.0;
  std::vector<Phase> phase_order{kPhaseOrder.begin(), kPhaseOrder.end()};
  std::string scenario = "msvs";
};

inline void validate(const SimConfig& c) {
  require(c.horizon >= 1, ErrorCode::invalid_config, "sim.horizon must be >= 1 (got " + std::to_string(c.horizon) + ")");
  require(c.slot_duration_s > 0.0, ErrorCode::invalid_config, "sim.slot_duration_s must be > 0");
  require(c.phase_order.size() == kPhaseOrder.size() &&
              std::equal(c.phase_order.begin(), c.phase_order.end(), kPhaseOrder.begin()),
          ErrorCode::invalid_config, "sim.phase_order must be the fixed eight-phase order");
  require(!c.scenario.empty(), ErrorCode::invalid_config, "sim.scenario must be named");
}

struct Event {
  int slot = 0;
  Phase phase = Phase::collect;
  std::string kind;
  int subject = -1;
  double value = 0.0;
  std::string detail;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SlotEvents {
  int slot = 0;
  std::vector<Event> events;

  void add(Phase p, std::string kind, int subject = -1, double value = 0.0, std::string detail = {}) {
    events.push_back({slot, p, std::move(kind), subject, value, std::move(detail)});
  }
  std::size_t count(const std::string& kind) const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.kind == kind; }));
  }
};

struct MetricsRow {
  int slot = 0;
  double mean_qoe = 0.0;
  double mean_utility = 0.0;
  double mean_bitrate_bps = 0.0;
  double mean_rebuffer_s = 0.0;
  double mean_switch = 0.0;
  double mean_waste_s = 0.0;
  double labeled_error = 0.0;
  double unlabeled_error = 0.0;
  int collections = 0;
  int triggers = 0;
  int updates = 0;
  int groups = 0;
  double msvs_share = 1.0;
  double split_eta = 1.0;
  double transcode_cost = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct SimReport {
  std::vector<MetricsRow> rows;
  /// Per slot, per user QoE.
  std::vector<std::vector<double>> user_qoe;
  std::vector<Event> events;
  nlohmann::json config;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// A simulated world driven phase by phase. Implementations own all state.
class World {
 public:
  virtual ~World() = default;
  virtual int slot() const = 0;
  virtual void run_phase(Phase p, SlotEvents& ev) = 0;
  /// Called once the eight phases ran; must advance the clock by one.
  virtual void end_slot(SlotEvents& ev, SimReport& report) = 0;
};

using PhaseObserver = std::function<void(Phase, const SlotEvents&)>;

/// Runs the eight phases of one slot. A phase that throws is recorded as a
/// phase-error event and the slot continues.
inline SlotEvents advance_slot(World& w, SimReport& report, const PhaseObserver& observer = {}) {
  SlotEvents ev;
  ev.slot = w.slot();
  for (Phase p : kPhaseOrder) {
    try {
      w.run_phase(p, ev);
    } catch (const std::exception& e) {
      ev.add(p, "phase-error", -1, 0.0, e.what());
    }
    if (observer) observer(p, ev);
  }
  w.end_slot(ev, report);
  report.events.insert(report.events.end(), ev.events.begin(), ev.events.end());
  return ev;
}

}  // namespace ndt::sim
