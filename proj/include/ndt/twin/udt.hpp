#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <json.hpp>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/learners/predictor.hpp"
#include "ndt/physnet.hpp"
#include "ndt/twin/detector.hpp"

namespace ndt::twin {

using learners::Vector;

enum class Source { collected, predicted };

inline const char* to_string(Source s) { return s == Source::collected ? "collected" : "predicted"; }

struct Profile {
  int user_id = 0;
  int categories = 8;
};

struct Behavior {
  /// Swipes reported since the previous collection.
  std::vector<physnet::SwipeEvent> swipes;
  double watch_ratio = 0.0;
  /// Preference estimate over categories; sums to 1.
  std::vector<double> preference;
};

struct Networking {
  physnet::Vec2 position;
  double channel_gain_db = 0.0;
  int serving_bs = 0;
};

struct StatusRecord {
  int slot = 0;
  Source source = Source::collected;
  /// Predicted by last-value hold because the predictor was not usable.
  bool fallback = false;
  Profile profile;
  Behavior behavior;
  Networking networking;
};

/// Per-feature scales used to express status errors in normalized units.
struct StatusScales {
  double position_m = 50.0;
  double gain_db = 10.0;
  double watch_ratio = 0.25;
  double preference = 0.1;

  Vector vector(int categories) const {
    Vector s(4 + categories);
    s << position_m, position_m, gain_db, watch_ratio, Vector::Constant(categories, preference);
    return s;
  }
};

/// [x, y, channel gain, watch ratio, preference...]
inline Vector status_vector(const StatusRecord& r) {
  const auto c = static_cast<Eigen::Index>(r.behavior.preference.size());
  Vector v(4 + c);
  v[0] = r.networking.position.x;
  v[1] = r.networking.position.y;
  v[2] = r.networking.channel_gain_db;
  v[3] = r.behavior.watch_ratio;
  for (Eigen::Index i = 0; i < c; ++i) v[4 + i] = r.behavior.preference[static_cast<std::size_t>(i)];
  return v;
}

/// Inverse of status_vector on top of a template record. Preference is
/// clipped at zero and renormalized, watch ratio clamped to [0, 1].
inline StatusRecord record_from_vector(const StatusRecord& base, const Vector& v, int slot, Source source) {
  StatusRecord r;
  r.slot = slot;
  r.source = source;
  r.profile = base.profile;
  r.networking.serving_bs = base.networking.serving_bs;
  r.networking.position = {v[0], v[1]};
  r.networking.channel_gain_db = v[2];
  r.behavior.watch_ratio = std::clamp(v[3], 0.0, 1.0);
  const auto c = v.size() - 4;
  r.behavior.preference.resize(static_cast<std::size_t>(c));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < c; ++i) {
    r.behavior.preference[static_cast<std::size_t>(i)] = std::max(0.0, v[4 + i]);
    sum += r.behavior.preference[static_cast<std::size_t>(i)];
  }
  if (sum > 0.0)
    for (auto& p : r.behavior.preference) p /= sum;
  else
    r.behavior.preference = base.behavior.preference;
  return r;
}

inline double normalized_error(const Vector& pred, const Vector& actual, const Vector& scale) {
  require(pred.size() == actual.size() && pred.size() == scale.size(), ErrorCode::dim_mismatch,
          "normalized_error: dimension mismatch");
  const Vector a = pred.cwiseQuotient(scale);
  const Vector b = actual.cwiseQuotient(scale);
  return labeled_error({a.data(), static_cast<std::size_t>(a.size())},
                       {b.data(), static_cast<std::size_t>(b.size())});
}

struct Forecast {
  int slot = 0;
  Vector status;
};

struct UserDigitalTwin {
  int user_id = 0;
  std::vector<StatusRecord> records;
  learners::SequencePredictor predictor;
  DualErrorDetector detector;
  StatusScales scales;
  int collection_period = 8;
  int last_collection_slot = std::numeric_limits<int>::min() / 2;
  /// Prediction for the next slot, made when the twin last advanced.
  std::optional<Forecast> forecast;
  /// Collect at the next opportunity regardless of the period.
  bool refresh = false;
  int fallbacks = 0;

  int window() const { return predictor.window(); }
  const StatusRecord& latest() const {
    require(!records.empty(), ErrorCode::insufficient_history, "twin has no records");
    return records.back();
  }
};

inline bool collection_due(const UserDigitalTwin& t, int slot) {
  return t.refresh || slot - t.last_collection_slot >= t.collection_period;
}

struct IngestResult {
  std::optional<double> labeled_mse;
  AccumulateResult detector;
};

/// Appends a collected record. A record already present for the same slot is
/// replaced. The labeled error is taken against the stored forecast for this
/// slot, in normalized units, and fed to the twin's detector.
inline IngestResult udt_ingest(UserDigitalTwin& t, StatusRecord sample, int slot) {
  if (!t.records.empty())
    require(slot >= t.records.back().slot, ErrorCode::out_of_order_sample,
            "udt_ingest: slot " + std::to_string(slot) + " precedes last record slot " +
                std::to_string(t.records.back().slot));
  sample.slot = slot;
  sample.source = Source::collected;
  sample.fallback = false;
  IngestResult out;
  if (t.forecast && t.forecast->slot == slot) {
    const Vector actual = status_vector(sample);
    const int c = static_cast<int>(actual.size()) - 4;
    out.labeled_mse = normalized_error(t.forecast->status, actual, t.scales.vector(c));
    out.detector = accumulate_error(t.detector, out.labeled_mse, std::nullopt);
  }
  if (!t.records.empty() && t.records.back().slot == slot)
    t.records.back() = std::move(sample);
  else
    t.records.push_back(std::move(sample));
  t.last_collection_slot = slot;
  t.refresh = false;
  t.forecast.reset();
  return out;
}

/// Status vectors of the last `count` records (fewer if the history is short).
inline std::vector<Vector> udt_series(const UserDigitalTwin& t, std::size_t count) {
  const std::size_t n = std::min(count, t.records.size());
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = t.records.size() - n; i < t.records.size(); ++i) out.push_back(status_vector(t.records[i]));
  return out;
}

inline bool predictor_ready(const UserDigitalTwin& t) {
  return t.predictor.trained() && t.records.size() >= static_cast<std::size_t>(t.window());
}

/// One-step prediction from the last W records, or last-value hold.
inline Vector udt_predict_next(const UserDigitalTwin& t, bool* fallback = nullptr) {
  require(!t.records.empty(), ErrorCode::insufficient_history, "udt_predict_next: empty history");
  const bool ok = predictor_ready(t);
  if (fallback) *fallback = !ok;
  if (!ok) return status_vector(t.records.back());
  const auto window = udt_series(t, static_cast<std::size_t>(t.window()));
  return learners::predict_next(t.predictor, window);
}

/// Appends a predicted record for `slot`. With fewer than W records or an
/// untrained predictor the last record is held and flagged as fallback.
inline const StatusRecord& udt_emulate(UserDigitalTwin& t, int slot, bool use_predictor = true) {
  require(!t.records.empty(), ErrorCode::insufficient_history, "udt_emulate: no record to extend");
  require(slot > t.records.back().slot, ErrorCode::out_of_order_sample, "udt_emulate: slot already has a record");
  StatusRecord r;
  if (use_predictor && predictor_ready(t)) {
    const bool cached = t.forecast && t.forecast->slot == slot;
    r = record_from_vector(t.records.back(), cached ? t.forecast->status : udt_predict_next(t), slot,
                           Source::predicted);
  } else {
    r = t.records.back();
    r.slot = slot;
    r.source = Source::predicted;
    r.behavior.swipes.clear();
  }
  const bool fallback = !(use_predictor && predictor_ready(t));
  r.fallback = fallback;
  if (fallback) ++t.fallbacks;
  t.records.push_back(std::move(r));
  return t.records.back();
}

/// Stores the prediction for slot + 1 made from the current history.
inline void udt_forecast(UserDigitalTwin& t, int next_slot, bool use_predictor = true) {
  if (t.records.empty()) return;
  bool fallback = false;
  Vector v = use_predictor ? udt_predict_next(t, &fallback) : status_vector(t.records.back());
  t.forecast = Forecast{next_slot, std::move(v)};
}

/// Trains the twin's predictor from scratch on its whole history.
inline void udt_train(UserDigitalTwin& t, const learners::PredictorHyper& hyper, RandomStream rng) {
  const auto series = udt_series(t, t.records.size());
  auto h = hyper;
  if (h.scale_floor.empty()) {
    const Vector s = t.scales.vector(static_cast<int>(series.front().size()) - 4);
    h.scale_floor.assign(s.data(), s.data() + s.size());
  }
  t.predictor = learners::train_predictor(series, h, rng);
}

/// Continues training on the most recent records.
inline void udt_update(UserDigitalTwin& t, std::size_t recent, int epochs = -1) {
  const auto series = udt_series(t, recent);
  if (series.size() < static_cast<std::size_t>(t.window()) + 1) return;
  t.predictor = learners::incremental_update(std::move(t.predictor), series, epochs);
}

// --- export ---------------------------------------------------------------

inline nlohmann::json record_to_json(const StatusRecord& r) {
  nlohmann::json swipes = nlohmann::json::array();
  for (const auto& e : r.behavior.swipes)
    swipes.push_back({{"slot", e.slot}, {"watched_s", e.watched_duration}, {"abandoned", e.abandoned}});
  return {
      {"slot", r.slot},
      {"source", to_string(r.source)},
      {"fallback", r.fallback},
      {"profile", {{"user_id", r.profile.user_id}, {"categories", r.profile.categories}}},
      {"behavior", {{"swipes", swipes}, {"watch_ratio", r.behavior.watch_ratio}, {"preference", r.behavior.preference}}},
      {"networking",
       {{"x", r.networking.position.x},
        {"y", r.networking.position.y},
        {"channel_gain_db", r.networking.channel_gain_db},
        {"serving_bs", r.networking.serving_bs}}},
  };
}

inline StatusRecord record_from_json(const nlohmann::json& j) {
  StatusRecord r;
  r.slot = j.at("slot");
  const std::string src = j.at("source");
  require(src == "collected" || src == "predicted", ErrorCode::parse_error, "record: unknown source '" + src + "'");
  r.source = src == "collected" ? Source::collected : Source::predicted;
  r.fallback = j.value("fallback", false);
  r.profile.user_id = j.at("profile").at("user_id");
  r.profile.categories = j.at("profile").at("categories");
  const auto& b = j.at("behavior");
  for (const auto& e : b.at("swipes"))
    r.behavior.swipes.push_back({r.profile.user_id, e.at("slot"), e.at("watched_s"), e.at("abandoned")});
  r.behavior.watch_ratio = b.at("watch_ratio");
  r.behavior.preference = b.at("preference").get<std::vector<double>>();
  const auto& n = j.at("networking");
  r.networking.position = {n.at("x"), n.at("y")};
  r.networking.channel_gain_db = n.at("channel_gain_db");
  r.networking.serving_bs = n.at("serving_bs");
  return r;
}

/// One JSON object per record, newline separated.
inline std::string export_records_jsonl(const UserDigitalTwin& t) {
  std::ostringstream os;
  for (const auto& r : t.records) os << record_to_json(r).dump() << '\n';
  return os.str();
}

}  // namespace ndt::twin
