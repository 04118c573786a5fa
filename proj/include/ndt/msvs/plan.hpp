#pragma once

// Heuristic communication / computing / buffer plan for the multicast groups.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/learners/kmeans.hpp"
#include "ndt/msvs/qoe.hpp"
#include "ndt/twin/detector.hpp"

namespace ndt::msvs {

struct GroupDemand {
  int size = 0;
  /// Worst member spectral efficiency, bit/s/Hz.
  double worst_efficiency = 0.0;
  std::vector<double> swipe_dist;
};

struct PlanParams {
  std::vector<double> ladder_bps{0.5e6, 1.0e6, 2.0e6, 4.0e6};
  double capacity = 6.0;
  /// Rungs with a live representation from the previous slot.
  std::vector<bool> cached;
  /// A rung is sustainable when bitrate <= margin * rate.
  double margin = 0.9;
  double eta = 1.0;
  bool water_fill = true;
  double lookahead_s = 4.0;
  double continuation = 0.9;
  int max_depth = 4;
  std::vector<double> bin_edges = twin::uniform_bins(2.0, 60.0);
  QoeWeights weights;
  double slot_s = 1.0;
};

struct GroupPlan {
  int rung = 0;
  double bitrate_bps = 0.0;
  double bandwidth_hz = 0.0;
  bool transcode = false;
  int prefetch_depth = 1;
  bool infeasible = false;
};

struct Plan3C {
  std::vector<GroupPlan> groups;
  std::vector<int> transcoded_rungs;
  double transcode_cost = 0.0;
  double bandwidth_used = 0.0;
  /// Sum over groups of size times bitrate utility.
  double utility = 0.0;
};

/// Transcoding cost of ladder rung i is i + 1 units.
inline double rung_cost(std::size_t rung) { return static_cast<double>(rung + 1); }

inline bool sustainable(double bitrate, double bandwidth_hz, double efficiency, double margin) {
  return bitrate <= margin * bandwidth_hz * efficiency;
}

inline int highest_sustainable(std::span<const double> ladder, double bandwidth_hz, double efficiency, double margin) {
  int best = -1;
  for (std::size_t r = 0; r < ladder.size(); ++r)
    if (sustainable(ladder[r], bandwidth_hz, efficiency, margin)) best = static_cast<int>(r);
  return best;
}

inline std::vector<double> proportional_split(std::span<const GroupDemand> groups, double quota_hz, double eta) {
  std::vector<double> w(groups.size());
  double total = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    w[g] = std::pow(static_cast<double>(groups[g].size), eta);
    total += w[g];
  }
  for (auto& v : w) v = quota_hz * v / total;
  return w;
}

/// Smallest D >= 1 with 1 - q^(D+1) >= continuation, where q is the chance
/// a video is left within the lookahead; capped at max_depth.
inline int prefetch_depth(std::span<const double> swipe_dist, const PlanParams& p) {
  const double q = swipe_dist.empty() ? 0.0 : twin::mass_below(swipe_dist, p.bin_edges, p.lookahead_s);
  for (int d = 1; d < p.max_depth; ++d)
    if (1.0 - std::pow(q, d + 1) >= p.continuation) return d;
  return p.max_depth;
}

namespace detail {

inline double bandwidth_for(double bitrate, double efficiency, double margin) {
  return efficiency > 0.0 ? bitrate / (margin * efficiency) : std::numeric_limits<double>::infinity();
}

/// One pass: trim every feasible group to what its rung needs, then hand the
/// pooled slack to upgrades in order of utility gain per extra Hz. What is
/// left goes back in proportion to the original split.
inline void water_fill(std::span<const GroupDemand> groups, std::vector<double>& share, const PlanParams& p) {
  const auto& ladder = p.ladder_bps;
  const std::vector<double> base = share;
  double base_total = std::accumulate(base.begin(), base.end(), 0.0);
  std::vector<int> rung(groups.size());
  double pool = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    rung[g] = highest_sustainable(ladder, share[g], groups[g].worst_efficiency, p.margin);
    if (rung[g] < 0) continue;
    const double need = bandwidth_for(ladder[static_cast<std::size_t>(rung[g])], groups[g].worst_efficiency, p.margin);
    pool += share[g] - need;
    share[g] = need;
  }
  struct Upgrade {
    std::size_t g;
    double extra;
    double gradient;
  };
  std::vector<Upgrade> ups;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int next = rung[g] + 1;
    if (next >= static_cast<int>(ladder.size())) continue;
    const double need = bandwidth_for(ladder[static_cast<std::size_t>(next)], groups[g].worst_efficiency, p.margin);
    if (!std::isfinite(need)) continue;
    const double extra = need - share[g];
    double gain = bitrate_utility(ladder[static_cast<std::size_t>(next)], p.weights);
    if (rung[g] >= 0)
      gain -= bitrate_utility(ladder[static_cast<std::size_t>(rung[g])], p.weights);
    else
      gain += p.weights.beta * p.slot_s;
    ups.push_back({g, extra, groups[g].size * gain / std::max(extra, 1e-12)});
  }
  std::stable_sort(ups.begin(), ups.end(), [](const Upgrade& a, const Upgrade& b) { return a.gradient > b.gradient; });
  for (const auto& u : ups) {
    if (u.extra <= pool) {
      share[u.g] += u.extra;
      pool -= u.extra;
    }
  }
  if (pool > 0.0 && base_total > 0.0)
    for (std::size_t g = 0; g < groups.size(); ++g) share[g] += pool * base[g] / base_total;
}

}  // namespace detail

/// Plans bitrate, bandwidth, transcoding and prefetch for every group.
///
/// Bandwidth starts proportional to |g|^eta (eta = 1 is proportional to group
/// size) and is refined by one water-filling pass. Rungs are then chosen
/// jointly with the transcode set: every subset of uncached rungs that fits
/// the capacity is tried, each group takes its highest sustainable rung in
/// the available set, and the best total utility wins (ties go to the cheaper
/// and then the lower-numbered set). Groups with no sustainable rung get the
/// lowest rung and are flagged.
inline Plan3C plan_3c(std::span<const GroupDemand> groups, double quota_hz, const PlanParams& p) {
  require(!p.ladder_bps.empty(), ErrorCode::invalid_argument, "plan_3c: empty ladder");
  require(quota_hz >= 0.0, ErrorCode::invalid_argument, "plan_3c: negative quota");
  require(p.capacity >= rung_cost(0), ErrorCode::invalid_argument, "plan_3c: capacity below the cheapest transcode");
  for (const auto& g : groups) require(g.size > 0, ErrorCode::empty_group, "plan_3c: empty group");
  Plan3C plan;
  if (groups.empty()) return plan;
  const auto& ladder = p.ladder_bps;
  const std::size_t nr = ladder.size();
  std::vector<bool> cached = p.cached;
  cached.resize(nr, false);

  std::vector<double> share = proportional_split(groups, quota_hz, p.eta);
  if (p.water_fill && quota_hz > 0.0) detail::water_fill(groups, share, p);

  std::vector<int> best_sus(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    best_sus[g] = highest_sustainable(ladder, share[g], groups[g].worst_efficiency, p.margin);

  double best_value = -std::numeric_limits<double>::infinity();
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best_rungs;
  unsigned best_mask = 0;
  for (unsigned mask = 0; mask < (1u << nr); ++mask) {
    double cost = 0.0;
    bool skip = false;
    for (std::size_t r = 0; r < nr; ++r) {
      if (!(mask >> r & 1u)) continue;
      if (cached[r]) skip = true;
      cost += rung_cost(r);
    }
    if (skip || cost > p.capacity) continue;
    auto available = [&](std::size_t r) { return cached[r] || (mask >> r & 1u); };
    std::vector<int> rungs(groups.size(), -1);
    double value = 0.0;
    bool valid = true;
    for (std::size_t g = 0; g < groups.size() && valid; ++g) {
      if (best_sus[g] < 0) {
        valid = available(0);
        rungs[g] = 0;
      } else {
        for (int r = best_sus[g]; r >= 0; --r)
          if (available(static_cast<std::size_t>(r))) {
            rungs[g] = r;
            break;
          }
        valid = rungs[g] >= 0;
      }
      if (valid) value += groups[g].size * bitrate_utility(ladder[static_cast<std::size_t>(rungs[g])], p.weights);
    }
    if (!valid) continue;
    if (value > best_value || (value == best_value && cost < best_cost)) {
      best_value = value;
      best_cost = cost;
      best_rungs = rungs;
      best_mask = mask;
    }
  }

  // Only rungs somebody streams are actually transcoded.
  std::vector<bool> used(nr, false);
  for (int r : best_rungs) used[static_cast<std::size_t>(r)] = true;
  for (std::size_t r = 0; r < nr; ++r) {
    if ((best_mask >> r & 1u) && used[r]) {
      plan.transcoded_rungs.push_back(static_cast<int>(r));
      plan.transcode_cost += rung_cost(r);
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GroupPlan gp;
    gp.rung = best_rungs[g];
    gp.bitrate_bps = ladder[static_cast<std::size_t>(gp.rung)];
    gp.bandwidth_hz = share[g];
    gp.transcode = !cached[static_cast<std::size_t>(gp.rung)];
    gp.infeasible = best_sus[g] < 0;
    gp.prefetch_depth = prefetch_depth(groups[g].swipe_dist, p);
    plan.bandwidth_used += share[g];
    plan.utility += groups[g].size * bitrate_utility(gp.bitrate_bps, p.weights);
    plan.groups.push_back(gp);
  }
  return plan;
}

/// Restricts freely chosen rungs to the transcoding capacity: groups are
/// served in order of size, each keeping its rung if it is cached, already
/// scheduled or affordable, otherwise dropping to the highest such rung
/// below it, or else the lowest available rung.
inline std::vector<int> fit_capacity(std::span<const int> rungs, std::span<const GroupDemand> groups,
                                     const std::vector<bool>& cached_in, double capacity, std::size_t ladder_size,
                                     double* cost_out = nullptr) {
  std::vector<bool> avail = cached_in;
  avail.resize(ladder_size, false);
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return groups[a].size > groups[b].size; });
  double spent = 0.0;
  std::vector<int> out(rungs.begin(), rungs.end());
  for (std::size_t g : order) {
    int chosen = 0;
    bool found = false;
    for (int r = rungs[g]; r >= 0 && !found; --r) {
      const auto ur = static_cast<std::size_t>(r);
      if (avail[ur]) {
        chosen = r;
        found = true;
      } else if (spent + rung_cost(ur) <= capacity) {
        spent += rung_cost(ur);
        avail[ur] = true;
        chosen = r;
        found = true;
      }
    }
    for (std::size_t r = 0; r < ladder_size && !found; ++r) {
      if (avail[r]) {
        chosen = static_cast<int>(r);
        found = true;
      }
    }
    out[g] = chosen;
  }
  if (cost_out) *cost_out = spent;
  return out;
}

/// K-means partition of the latents into at most k non-empty groups.
inline std::vector<std::vector<int>> regroup(const Eigen::MatrixXd& latents, int k, RandomStream& rng) {
  const auto cl = learners::kmeans_cluster(latents, k, rng);
  std::vector<std::vector<int>> g(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < cl.assignment.size(); ++i) g[static_cast<std::size_t>(cl.assignment[i])].push_back(static_cast<int>(i));
  std::erase_if(g, [](const auto& v) { return v.empty(); });
  return g;
}

}  // namespace ndt::msvs
