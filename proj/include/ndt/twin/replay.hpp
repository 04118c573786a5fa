#pragma once

// Internal what-if simulator shared by the infrastructure and slice twins.
// A frozen snapshot of the multicast groups is replayed for a few virtual
// slots under a bandwidth policy; channel fluctuation comes from the rng
// stream so two policies replayed from the same stream see the same trace.

#include <cmath>
#include <deque>
#include <json.hpp>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::twin {

struct ReplayGroup {
  int size = 1;
  /// Worst member spectral efficiency, bit/s/Hz.
  double spectral_efficiency = 0.0;
};

struct ReplaySnapshot {
  int slot = 0;
  double quota_hz = 0.0;
  std::vector<double> ladder_bps;
  double alpha = 1.0;
  double beta = 2.0;
  double slot_s = 1.0;
  double margin = 0.9;
  /// Log-normal spread of per-slot efficiency around the snapshot value.
  double efficiency_sigma = 0.1;
  std::vector<ReplayGroup> groups;
};

/// Split exponent eta: group g receives quota * |g|^eta / sum |h|^eta,
/// scaled by quota_scale.
struct SplitPolicy {
  double eta = 1.0;
  double quota_scale = 1.0;

  friend bool operator==(const SplitPolicy&, const SplitPolicy&) = default;
};

struct ValidationReport {
  bool accepted = false;
  double predicted_gain = 0.0;
  double candidate_value = 0.0;
  double incumbent_value = 0.0;
};

inline std::vector<double> split_shares(const std::vector<ReplayGroup>& groups, double eta) {
  std::vector<double> w(groups.size());
  double total = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    w[g] = std::pow(static_cast<double>(groups[g].size), eta);
    total += w[g];
  }
  for (auto& v : w) v = total > 0.0 ? v / total : 0.0;
  return w;
}

/// Mean per-user slot QoE over `horizon` virtual slots. Each group streams the
/// highest rung within margin of its rate (lowest rung if none) and scores
/// alpha ln(1 + b / b_min) f - beta slot_s (1 - f) with f the delivered fraction.
inline double replay_mean_qoe(const ReplaySnapshot& snap, const SplitPolicy& policy, int horizon, RandomStream rng) {
  require(!snap.ladder_bps.empty(), ErrorCode::invalid_argument, "replay: empty ladder");
  if (snap.groups.empty() || horizon <= 0) return 0.0;
  const auto shares = split_shares(snap.groups, policy.eta);
  const double quota = snap.quota_hz * policy.quota_scale;
  const double bmin = snap.ladder_bps.front();
  double total = 0.0;
  double users = 0.0;
  for (int v = 0; v < horizon; ++v) {
    for (std::size_t g = 0; g < snap.groups.size(); ++g) {
      const double z = rng.normal();
      const double eff = snap.groups[g].spectral_efficiency * std::exp(snap.efficiency_sigma * z);
      const double rate = quota * shares[g] * eff;
      double b = snap.ladder_bps.front();
      for (double rung : snap.ladder_bps)
        if (rung <= snap.margin * rate) b = rung;
      const double f = std::min(1.0, rate / b);
      const double q = snap.alpha * std::log(1.0 + b / bmin) * f - snap.beta * snap.slot_s * (1.0 - f);
      total += q * snap.groups[g].size;
      users += snap.groups[g].size;
    }
  }
  return total / users;
}

/// Replays candidate and incumbent from the same stream position. Ties accept
/// the candidate.
template <class Objective>
ValidationReport validate_with(Objective&& objective) {
  ValidationReport r;
  r.candidate_value = objective(true);
  r.incumbent_value = objective(false);
  r.predicted_gain = r.candidate_value - r.incumbent_value;
  r.accepted = r.candidate_value >= r.incumbent_value;
  return r;
}

inline ValidationReport validate_policy(const std::deque<ReplaySnapshot>& mirror, const SplitPolicy& candidate,
                                        const SplitPolicy& incumbent, int horizon, const RandomStream& rng) {
  require(!mirror.empty(), ErrorCode::empty_mirror, "validate_policy: no mirrored snapshot");
  const ReplaySnapshot& snap = mirror.back();
  return validate_with([&](bool cand) { return replay_mean_qoe(snap, cand ? candidate : incumbent, horizon, rng); });
}

inline nlohmann::json snapshot_to_json(const ReplaySnapshot& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : s.groups) groups.push_back({{"size", g.size}, {"spectral_efficiency", g.spectral_efficiency}});
  return {{"slot", s.slot},         {"quota_hz", s.quota_hz}, {"ladder_bps", s.ladder_bps},
          {"alpha", s.alpha},       {"beta", s.beta},         {"slot_s", s.slot_s},
          {"margin", s.margin},     {"efficiency_sigma", s.efficiency_sigma},
          {"groups", groups}};
}

inline ReplaySnapshot snapshot_from_json(const nlohmann::json& j) {
  ReplaySnapshot s;
  s.slot = j.at("slot");
  s.quota_hz = j.at("quota_hz");
  s.ladder_bps = j.at("ladder_bps").get<std::vector<double>>();
  s.alpha = j.at("alpha");
  s.beta = j.at("beta");
  s.slot_s = j.at("slot_s");
  s.margin = j.at("margin");
  s.efficiency_sigma = j.at("efficiency_sigma");
  for (const auto& g : j.at("groups")) s.groups.push_back({g.at("size"), g.at("spectral_efficiency")});
  return s;
}

}  // namespace ndt::twin
