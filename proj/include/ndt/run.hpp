#pragma once

// Scenario registry and the single-run driver.

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "ndt/msvs/scenario.hpp"
#include "ndt/sim/kernel.hpp"

namespace ndt {

using WorldFactory = std::function<std::unique_ptr<sim::World>(const sim::SimConfig&, const msvs::ScenarioConfig&)>;

inline std::map<std::string, WorldFactory>& scenario_registry() {
  static std::map<std::string, WorldFactory> r{
      {"msvs", [](const sim::SimConfig& s, const msvs::ScenarioConfig& c) { return std::make_unique<msvs::MsvsWorld>(s, c); }},
  };
  return r;
}

inline std::unique_ptr<sim::World> make_world(const sim::SimConfig& sc, const msvs::ScenarioConfig& cfg) {
  const auto& reg = scenario_registry();
  const auto it = reg.find(sc.scenario);
  require(it != reg.end(), ErrorCode::scenario_not_found, "no scenario named '" + sc.scenario + "'");
  return it->second(sc, cfg);
}

/// Runs `horizon` slots and returns one metrics row per slot.
inline sim::SimReport run(const sim::SimConfig& sc, const msvs::ScenarioConfig& cfg,
                          const sim::PhaseObserver& observer = {}) {
  sim::validate(sc);
  auto world = make_world(sc, cfg);
  sim::SimReport report;
  report.rows.reserve(static_cast<std::size_t>(sc.horizon));
  for (int t = 0; t < sc.horizon; ++t) sim::advance_slot(*world, report, observer);
  return report;
}

}  // namespace ndt
