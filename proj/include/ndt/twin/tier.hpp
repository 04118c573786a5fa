#pragma once

#include <array>

#include "ndt/error.hpp"

namespace ndt::twin {

enum class TaskClass { status_fill = 0, feature_abstraction = 1, policy_synthesis = 2 };
enum class Tier { light, heavy };

inline const char* to_string(TaskClass c) {
  switch (c) {
    case TaskClass::status_fill: return "status-fill";
    case TaskClass::feature_abstraction: return "feature-abstraction";
    case TaskClass::policy_synthesis: return "policy-synthesis";
  }
  return "?";
}

inline const char* to_string(Tier t) { return t == Tier::heavy ? "heavy" : "light"; }

struct TierSpec {
  double light_cost = 0.0;
  double heavy_cost = 1.0;
  /// Heavy is wanted when the recent error exceeds this.
  double threshold = 0.0;
};

struct TierSelector {
  std::array<TierSpec, 3> table{};
  double budget_per_slot = 1e9;
  double remaining = 1e9;

  TierSpec& spec(TaskClass c) { return table[static_cast<std::size_t>(c)]; }
  const TierSpec& spec(TaskClass c) const { return table[static_cast<std::size_t>(c)]; }
};

struct TierDecision {
  Tier tier = Tier::light;
  /// Heavy was wanted but the budget could not pay for it.
  bool deferred = false;
  double cost = 0.0;
};

inline void begin_slot(TierSelector& s) { s.remaining = s.budget_per_slot; }

inline TierDecision select_inference_tier(TierSelector& s, TaskClass c, double recent_error) {
  const auto i = static_cast<std::size_t>(c);
  require(i < s.table.size(), ErrorCode::invalid_argument, "select_inference_tier: unknown task class");
  const TierSpec& t = s.table[i];
  TierDecision d;
  if (recent_error > t.threshold) {
    if (t.heavy_cost <= s.remaining) {
      d.tier = Tier::heavy;
      d.cost = t.heavy_cost;
    } else {
      d.deferred = true;
    }
  }
  if (d.tier == Tier::light) d.cost = t.light_cost <= s.remaining ? t.light_cost : 0.0;
  s.remaining -= d.cost;
  return d;
}

}  // namespace ndt::twin
