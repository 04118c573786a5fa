#pragma once

// Ground-truth physical network: mobility, channel, swipe-driven consumption,
// behavior drift and multicast delivery.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::physnet {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct ArenaParams {
  double width_m = 500.0;
  double height_m = 500.0;
  double v_max = 3.0;
};

struct PathLossParams {
  double pl0_db = 38.0;
  double d0_m = 1.0;
  double exponent = 3.0;
  double shadowing_sigma_db = 4.0;
  /// Slot-to-slot correlation of the shadowing process.
  double shadowing_correlation = 0.95;
  double noise_dbm = -100.0;
};

struct SwipeParams {
  double h_min = 0.02;
  double h_max = 0.5;
};

struct VideoState {
  int category = 0;
  double length_s = 0.0;
  double elapsed_s = 0.0;
};

struct User {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  Vec2 waypoint;
  std::vector<double> preference;
  double channel_gain_db = 0.0;
  double shadowing_db = 0.0;
  int serving_bs = 0;
  /// Seconds of the current video buffered ahead of the playhead.
  double buffer_s = 0.0;
  /// Seconds of leading segments of upcoming videos already prefetched.
  double prefetch_s = 0.0;
  /// Bitrate of the content sitting in the buffer.
  double buffer_bitrate = 0.0;
  VideoState video;
  /// Exponentially weighted watched fraction over finished videos.
  double watch_ratio = 0.5;
};

struct BaseStation {
  int id = 0;
  Vec2 position;
  double bandwidth_hz = 1.0e6;
  double tx_power_dbm = 30.0;
  double coverage_radius_m = 400.0;
  std::vector<int> attached_users;
};

struct EdgeServer {
  double compute_capacity = 6.0;
  std::vector<double> bitrate_ladder{0.5e6, 1.0e6, 2.0e6, 4.0e6};
  /// Ladder rungs with a live transcoded representation.
  std::vector<bool> cached;

  double transcode_cost(std::size_t rung) const { return static_cast<double>(rung + 1); }
};

struct SwipeEvent {
  int user_id = 0;
  int slot = 0;
  double watched_duration = 0.0;
  bool abandoned = false;
};

enum class Remap { reverse, rotate, resample };

struct DriftSpec {
  int slot = 0;
  double fraction = 0.6;
  Remap remap = Remap::reverse;
  int rotate_shift = 1;
};

struct DeliveryOutcome {
  double sustainable_rate_bps = 0.0;
  /// Current-stream seconds delivered to every member this slot.
  double delivered_s = 0.0;
  /// Spare seconds usable for prefetching upcoming videos.
  double prefetch_s = 0.0;
  std::vector<double> member_rate_bps;
};

// --- mobility -------------------------------------------------------------

inline Vec2 draw_waypoint(const ArenaParams& arena, RandomStream& rng) {
  const double x = rng.uniform(0.0, arena.width_m);
  const double y = rng.uniform(0.0, arena.height_m);
  return {x, y};
}

inline bool inside(const ArenaParams& arena, Vec2 p) {
  return p.x >= 0.0 && p.x <= arena.width_m && p.y >= 0.0 && p.y <= arena.height_m;
}

/// Random-waypoint step. Draws only when the waypoint is reached.
inline User step_mobility(User user, double dt, RandomStream& rng, const ArenaParams& arena) {
  require(dt > 0.0, ErrorCode::invalid_argument, "step_mobility: dt must be positive");
  const Vec2 to_wp = user.waypoint - user.position;
  const double speed = user.velocity.norm();
  if (to_wp.norm() <= speed * dt) {
    user.position = user.waypoint;
    user.waypoint = draw_waypoint(arena, rng);
    const double new_speed = rng.uniform(0.0, arena.v_max);
    const Vec2 dir = user.waypoint - user.position;
    const double len = dir.norm();
    user.velocity = len > 0.0 ? dir * (new_speed / len) : Vec2{};
  } else {
    user.position = user.position + user.velocity * dt;
  }
  return user;
}

// --- channel --------------------------------------------------------------

/// Log-distance path loss; distances below d0 are clamped to d0.
inline double path_loss_db(double distance_m, const PathLossParams& p) {
  const double d = std::max(distance_m, p.d0_m);
  return p.pl0_db + 10.0 * p.exponent * std::log10(d / p.d0_m);
}

/// Path loss with an independent log-normal shadowing draw.
inline double path_loss_db(double distance_m, const PathLossParams& p, RandomStream& rng) {
  return path_loss_db(distance_m, p) + rng.normal(0.0, p.shadowing_sigma_db);
}

/// AR(1) shadowing with stationary standard deviation sigma.
inline double step_shadowing(double current_db, const PathLossParams& p, RandomStream& rng) {
  const double rho = p.shadowing_correlation;
  return rho * current_db + std::sqrt(1.0 - rho * rho) * rng.normal(0.0, p.shadowing_sigma_db);
}

inline double achievable_rate_bps(double snr_linear, double bandwidth_hz) {
  require(snr_linear >= 0.0 && bandwidth_hz > 0.0, ErrorCode::invalid_argument,
          "achievable_rate_bps: snr must be >= 0 and bandwidth > 0");
  return bandwidth_hz * std::log2(1.0 + snr_linear);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double snr_linear(double tx_power_dbm, double gain_db, const PathLossParams& p) {
  return db_to_linear(tx_power_dbm + gain_db - p.noise_dbm);
}

/// Strongest mean-signal station; ties go to the lowest index.
inline int strongest_station(Vec2 pos, std::span<const BaseStation> stations, const PathLossParams& p) {
  int best = 0;
  double best_rx = -1e300;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const double rx = stations[i].tx_power_dbm - path_loss_db(distance(pos, stations[i].position), p);
    if (rx > best_rx) {
      best_rx = rx;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// --- consumption ----------------------------------------------------------

inline double abandon_hazard(double preference, const SwipeParams& sp) {
  return sp.h_min + (sp.h_max - sp.h_min) * (1.0 - preference);
}

/// One hazard trial after `elapsed` seconds of the current video. Always
/// consumes exactly one draw so stream positions do not depend on outcomes.
inline std::optional<SwipeEvent> sample_swipe(const User& user, int category, double elapsed,
                                              RandomStream& rng, const SwipeParams& sp,
                                              int slot = 0) {
  const double h = abandon_hazard(user.preference.at(static_cast<std::size_t>(category)), sp);
  const double u = rng.uniform();
  const double length = user.video.length_s;
  if (u < h) return SwipeEvent{user.id, slot, std::min(elapsed, length), true};
  if (elapsed >= length) return SwipeEvent{user.id, slot, length, false};
  return std::nullopt;
}

/// Samples a category from a probability vector.
inline int sample_category(std::span<const double> dist, RandomStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < dist.size(); ++c) {
    acc += dist[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(dist.size()) - 1;
}

struct CatalogParams {
  int categories = 8;
  double min_length_s = 10.0;
  double max_length_s = 60.0;
};

inline VideoState next_video(std::span<const double> content_dist, const CatalogParams& cat,
                             RandomStream& rng) {
  VideoState v;
  v.category = sample_category(content_dist, rng);
  v.length_s = rng.uniform(cat.min_length_s, cat.max_length_s);
  return v;
}

// --- drift ----------------------------------------------------------------

inline void remap_preference(std::vector<double>& pref, const DriftSpec& spec, RandomStream& rng) {
  const std::size_t c = pref.size();
  switch (spec.remap) {
    case Remap::reverse:
      std::reverse(pref.begin(), pref.end());
      break;
    case Remap::rotate: {
      const auto shift = static_cast<std::size_t>(((spec.rotate_shift % static_cast<int>(c)) +
                                                   static_cast<int>(c)) % static_cast<int>(c));
      std::rotate(pref.rbegin(), pref.rbegin() + static_cast<std::ptrdiff_t>(shift), pref.rend());
      break;
    }
    case Remap::resample: {
      double sum = 0.0;
      for (auto& v : pref) {
        v = -std::log(1.0 - rng.uniform());  // Dirichlet(1,...,1)
        sum += v;
      }
      for (auto& v : pref) v /= sum;
      break;
    }
  }
}

/// Remaps the preference of exactly round(fraction * n) users chosen by a
/// partial Fisher-Yates shuffle. Returns the affected user indices, sorted.
inline std::vector<std::size_t> inject_drift(std::vector<User>& users, const DriftSpec& spec,
                                             RandomStream& rng) {
  require(spec.fraction > 0.0 && spec.fraction <= 1.0, ErrorCode::invalid_argument,
          "inject_drift: fraction must be in (0, 1]");
  const std::size_t n = users.size();
  const auto count = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) remap_preference(users[i].preference, spec, rng);
  return idx;
}

// --- delivery -------------------------------------------------------------

/// Multicast over a shared allocation: the group runs at its worst member's
/// achievable rate.
inline DeliveryOutcome multicast_deliver(std::span<const double> member_snr, double bitrate_bps,
                                         double bandwidth_hz, double slot_duration_s) {
  require(!member_snr.empty(), ErrorCode::empty_group, "multicast_deliver: group has no members");
  require(bitrate_bps > 0.0, ErrorCode::invalid_argument, "multicast_deliver: bitrate must be positive");
  DeliveryOutcome out;
  out.member_rate_bps.reserve(member_snr.size());
  double worst = std::numeric_limits<double>::infinity();
  for (double snr : member_snr) {
    const double r = bandwidth_hz > 0.0 ? achievable_rate_bps(snr, bandwidth_hz) : 0.0;
    out.member_rate_bps.push_back(r);
    worst = std::min(worst, r);
  }
  out.sustainable_rate_bps = worst;
  const double ratio = worst / bitrate_bps;
  out.delivered_s = slot_duration_s * std::min(1.0, ratio);
  out.prefetch_s = slot_duration_s * std::max(0.0, ratio - 1.0);
  return out;
}

/// Credits a delivery to one member. Current-video content is capped at the
/// unbuffered remainder of the video; overflow and spare capacity fill the
/// prefetch store up to `prefetch_cap_s`.
inline void credit_delivery(User& user, const DeliveryOutcome& out, double bitrate_bps,
                            double prefetch_cap_s) {
  const double remaining =
      std::max(0.0, user.video.length_s - user.video.elapsed_s - user.buffer_s);
  const double to_current = std::min(out.delivered_s, remaining);
  if (to_current > 0.0) {
    user.buffer_s += to_current;
    user.buffer_bitrate = bitrate_bps;
  }
  const double spare = (out.delivered_s - to_current) + out.prefetch_s;
  user.prefetch_s = std::min(prefetch_cap_s, user.prefetch_s + spare);
}

// --- population -----------------------------------------------------------

struct PopulationParams {
  int archetypes = 3;
  /// Mass placed on the two peak categories of an archetype.
  double peak_mass_first = 0.8;
  double peak_mass_second = 0.1;
  /// Weight of the per-user random component.
  double individual_noise = 0.05;
};

/// Preference vector of archetype `a`: peaks at categories 2a and 2a+1.
inline std::vector<double> archetype_preference(int a, int categories, const PopulationParams& pp) {
  std::vector<double> base(static_cast<std::size_t>(categories), 0.0);
  const double rest = (1.0 - pp.peak_mass_first - pp.peak_mass_second) / (categories - 2);
  std::fill(base.begin(), base.end(), rest);
  base[static_cast<std::size_t>((2 * a) % categories)] = pp.peak_mass_first;
  base[static_cast<std::size_t>((2 * a + 1) % categories)] = pp.peak_mass_second;
  return base;
}

inline std::vector<double> draw_preference(int archetype, int categories, const PopulationParams& pp,
                                           RandomStream& rng) {
  auto pref = archetype_preference(archetype, categories, pp);
  std::vector<double> noise(pref.size());
  double nsum = 0.0;
  for (auto& v : noise) {
    v = rng.uniform();
    nsum += v;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < pref.size(); ++c) {
    pref[c] = (1.0 - pp.individual_noise) * pref[c] + pp.individual_noise * noise[c] / nsum;
    sum += pref[c];
  }
  for (auto& v : pref) v /= sum;
  return pref;
}

/// Users with archetype `i % archetypes`, uniform positions and waypoints.
inline std::vector<User> make_population(int n, const ArenaParams& arena, const CatalogParams& cat,
                                         const PopulationParams& pp, RandomStream& rng) {
  std::vector<User> users(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    User& u = users[static_cast<std::size_t>(i)];
    u.id = i;
    u.position = draw_waypoint(arena, rng);
    u.waypoint = draw_waypoint(arena, rng);
    const double speed = rng.uniform(0.0, arena.v_max);
    const Vec2 dir = u.waypoint - u.position;
    const double len = dir.norm();
    u.velocity = len > 0.0 ? dir * (speed / len) : Vec2{};
    u.preference = draw_preference(i % pp.archetypes, cat.categories, pp, rng);
  }
  return users;
}

/// Four stations at the quadrant centres of the arena.
inline std::vector<BaseStation> make_stations(const ArenaParams& arena, double bandwidth_hz,
                                              double tx_power_dbm) {
  std::vector<BaseStation> out;
  int id = 0;
  for (double fy : {0.25, 0.75}) {
    for (double fx : {0.25, 0.75}) {
      BaseStation bs;
      bs.id = id++;
      bs.position = {fx * arena.width_m, fy * arena.height_m};
      bs.bandwidth_hz = bandwidth_hz;
      bs.tx_power_dbm = tx_power_dbm;
      bs.coverage_radius_m = std::hypot(arena.width_m, arena.height_m);
      out.push_back(bs);
    }
  }
  return out;
}

/// Popularity of each category among a set of watch events: share of total
/// watched seconds. Exported for reporting only.
inline std::vector<double> category_popularity(std::span<const VideoState> watched, int categories) {
  std::vector<double> pop(static_cast<std::size_t>(categories), 0.0);
  double total = 0.0;
  for (const auto& v : watched) {
    pop[static_cast<std::size_t>(v.category)] += v.elapsed_s;
    total += v.elapsed_s;
  }
  if (total > 0.0)
    for (auto& p : pop) p /= total;
  return pop;
}

}  // namespace ndt::physnet
