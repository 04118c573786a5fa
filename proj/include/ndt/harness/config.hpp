#pragma once

// Experiment config file: one JSON document with sim, scenario and
// experiment sections. Defaults double as the schema for unknown-key checks.

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/msvs/scenario.hpp"
#include "ndt/sim/kernel.hpp"

namespace ndt::physnet {
NLOHMANN_JSON_SERIALIZE_ENUM(Remap, {{Remap::reverse, "reverse"}, {Remap::rotate, "rotate"}, {Remap::resample, "resample"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ArenaParams, width_m, height_m, v_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PathLossParams, pl0_db, d0_m, exponent, shadowing_sigma_db,
                                                shadowing_correlation, noise_dbm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SwipeParams, h_min, h_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CatalogParams, categories, min_length_s, max_length_s)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PopulationParams, archetypes, peak_mass_first, peak_mass_second,
                                                individual_noise)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DriftSpec, slot, fraction, remap, rotate_shift)
}  // namespace ndt::physnet

namespace ndt::learners {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PredictorHyper, hidden, window, learning_rate, epochs, update_epochs,
                                                init_scale, grad_clip, scale_floor)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QHyper, epsilon, alpha, gamma)
}  // namespace ndt::learners

namespace ndt::twin {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CollectionParams, p_min, p_max, initial, theta_hi, theta_lo)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SdtParams, share_actions, initial_share, background_weight,
                                                satisfaction_window, replay_horizon, qoe_max, demand_states,
                                                satisfaction_states, agent, background_slice)
}  // namespace ndt::twin

namespace ndt::msvs {
NLOHMANN_JSON_SERIALIZE_ENUM(Scheme, {{Scheme::proposed, "proposed"}, {Scheme::fixed_dt, "fixed-dt"}, {Scheme::hier_drl, "hier-drl"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QoeWeights, alpha, beta, gamma, delta, bitrate_min_bps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TwinLayerParams, preroll_slots, predictor, update_records, collection,
                                                theta_labeled, theta_unlabeled, twin_theta_labeled, update_duration,
                                                fixed_period, fixed_regroup_period, latent_dim, k_min, k_max,
                                                agent_epsilon, histogram_window, status_fill_threshold,
                                                abstraction_threshold, tier_budget)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, users, bandwidth_hz, scheme, drift, qoe, tx_power_dbm,
                                                arena, channel, swipe, catalog, population, ladder_bps, edge_capacity,
                                                margin, lookahead_s, continuation, max_prefetch_depth, water_fill,
                                                segment_s, twin, slicing_period, background_hz, static_slicing,
                                                static_share, sdt, validation_horizon, hier_epsilon, hier_alpha)
}  // namespace ndt::msvs

namespace ndt::harness {

enum class Format { csv, jsonl };

inline Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw Error(ErrorCode::validation_error, "unknown export format '" + s + "' (expected csv or jsonl)");
}

inline const char* to_string(Format f) { return f == Format::csv ? "csv" : "jsonl"; }

struct SweepAxis {
  /// Dotted path into the config document, e.g. "scenario.bandwidth_hz".
  std::string path;
  std::vector<double> values;
};

struct ExperimentSpec {
  /// Fully resolved document: sim and scenario sections with defaults filled.
  nlohmann::json base;
  sim::SimConfig sim;
  msvs::ScenarioConfig scenario;
  std::optional<SweepAxis> sweep;
  std::vector<std::uint64_t> seeds{1};
  std::vector<msvs::Scheme> schemes{msvs::Scheme::proposed};
  std::string out_dir = "out";
  std::vector<Format> formats{Format::csv};
  int parallel = 1;
};

inline nlohmann::json sim_to_json(const sim::SimConfig& s) {
  return {{"seed", s.seed}, {"horizon", s.horizon}, {"slot_duration_s", s.slot_duration_s}, {"scenario", s.scenario}};
}

/// The complete default document; every accepted key appears in it.
inline nlohmann::json default_document() {
  return {
      {"sim", sim_to_json({})},
      {"scenario", msvs::ScenarioConfig{}},
      {"experiment",
       {{"sweep", nullptr},
        {"seeds", {1}},
        {"schemes", {"proposed"}},
        {"out_dir", "out"},
        {"formats", {"csv"}},
        {"parallel", 1}}},
  };
}

namespace detail {

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number_integer() && b.is_number_float()) return false;
  if (a.is_number_unsigned() && b.is_number_integer() && !b.is_number_unsigned()) return false;
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

/// Overlays `user` on `schema` in place, rejecting keys the schema lacks and
/// values of the wrong kind. Arrays are replaced whole.
inline void overlay(nlohmann::json& schema, const nlohmann::json& user, const std::string& path) {
  require(user.is_object(), ErrorCode::validation_error, path + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    require(schema.contains(key), ErrorCode::validation_error, "unknown key '" + where + "'");
    auto& slot = schema[key];
    if (slot.is_object() && !slot.empty()) {
      overlay(slot, value, where);
    } else if (slot.is_null() || same_kind(slot, value)) {
      slot = value;
    } else {
      throw Error(ErrorCode::validation_error, where + ": expected " + std::string(slot.type_name()) + ", got " +
                                                   std::string(value.type_name()));
    }
  }
}

inline nlohmann::json* find_path(nlohmann::json& doc, const std::string& path) {
  nlohmann::json* cur = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur;
}

inline void check_drift_items(const nlohmann::json& drift) {
  const nlohmann::json schema = physnet::DriftSpec{};
  for (std::size_t i = 0; i < drift.size(); ++i) {
    nlohmann::json s = schema;
    overlay(s, drift[i], "scenario.drift[" + std::to_string(i) + "]");
  }
}

}  // namespace detail

inline sim::SimConfig sim_from_json(const nlohmann::json& j) {
  sim::SimConfig s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.horizon = j.at("horizon").get<int>();
  s.slot_duration_s = j.at("slot_duration_s").get<double>();
  s.scenario = j.at("scenario").get<std::string>();
  return s;
}

/// Builds sim and scenario configs from a resolved document, converting any
/// config failure into a validation error.
inline std::pair<sim::SimConfig, msvs::ScenarioConfig> configs_from_document(const nlohmann::json& doc) {
  try {
    const auto& sj = doc.at("scenario");
    msvs::scheme_from_string(sj.at("scheme").get<std::string>());
    for (std::size_t i = 0; i < sj.at("drift").size(); ++i) {
      const auto remap = sj["drift"][i].value("remap", std::string("reverse"));
      require(remap == "reverse" || remap == "rotate" || remap == "resample", ErrorCode::validation_error,
              "scenario.drift[" + std::to_string(i) + "].remap: unknown remap '" + remap + "'");
    }
    auto s = sim_from_json(doc.at("sim"));
    auto c = sj.get<msvs::ScenarioConfig>();
    sim::validate(s);
    msvs::validate(c);
    return {s, c};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::scenario_not_found) throw;
    throw Error(ErrorCode::validation_error, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::validation_error, std::string("config value: ") + e.what());
  }
}

/// Applies one sweep value at `path` to a resolved document.
inline nlohmann::json with_value(nlohmann::json doc, const std::string& path, double value) {
  auto* slot = detail::find_path(doc, path);
  require(slot != nullptr && slot->is_number(), ErrorCode::validation_error,
          "experiment.sweep.path: '" + path + "' is not a numeric config key");
  if (slot->is_number_integer())
    *slot = static_cast<std::int64_t>(std::llround(value));
  else
    *slot = value;
  return doc;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& user) {
  nlohmann::json doc = default_document();
  detail::overlay(doc, user, "");
  detail::check_drift_items(doc["scenario"]["drift"]);

  ExperimentSpec spec;
  spec.base = {{"sim", doc["sim"]}, {"scenario", doc["scenario"]}};
  std::tie(spec.sim, spec.scenario) = configs_from_document(spec.base);

  const auto& ex = doc["experiment"];
  try {
    if (!ex["sweep"].is_null()) {
      nlohmann::json sw = {{"path", "scenario.bandwidth_hz"}, {"values", nlohmann::json::array()}};
      detail::overlay(sw, ex["sweep"], "experiment.sweep");
      SweepAxis axis{sw["path"].get<std::string>(), sw["values"].get<std::vector<double>>()};
      require(!axis.values.empty(), ErrorCode::validation_error, "experiment.sweep.values must not be empty");
      for (double v : axis.values) configs_from_document(with_value(spec.base, axis.path, v));
      spec.sweep = std::move(axis);
    }
    for (const auto& s : ex["seeds"])
      require(s.is_number_integer() && s.get<std::int64_t>() >= 0, ErrorCode::validation_error, "experiment.seeds: seeds must be non-negative integers");
    spec.seeds = ex["seeds"].get<std::vector<std::uint64_t>>();
    spec.schemes.clear();
    for (const auto& s : ex["schemes"]) {
      try {
        spec.schemes.push_back(msvs::scheme_from_string(s.get<std::string>()));
      } catch (const Error& e) {
        throw Error(ErrorCode::validation_error, std::string("experiment.schemes: ") + e.what());
      }
    }
    spec.out_dir = ex["out_dir"].get<std::string>();
    spec.formats.clear();
    for (const auto& f : ex["formats"]) spec.formats.push_back(format_from_string(f.get<std::string>()));
    spec.parallel = ex["parallel"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::validation_error, std::string("experiment: ") + e.what());
  }
  require(!spec.seeds.empty(), ErrorCode::validation_error, "experiment.seeds must not be empty");
  require(std::set<std::uint64_t>(spec.seeds.begin(), spec.seeds.end()).size() == spec.seeds.size(),
          ErrorCode::validation_error, "experiment.seeds must be distinct");
  require(!spec.schemes.empty(), ErrorCode::validation_error, "experiment.schemes must not be empty");
  require(!spec.formats.empty(), ErrorCode::validation_error, "experiment.formats must not be empty");
  require(spec.parallel >= 1, ErrorCode::validation_error, "experiment.parallel must be >= 1");
  require(!spec.out_dir.empty(), ErrorCode::validation_error, "experiment.out_dir must not be empty");
  return spec;
}

inline ExperimentSpec parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
  return spec_from_json(j);
}

inline ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace ndt::harness
