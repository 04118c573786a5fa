#pragma once

// Multicast short-video streaming over the twin layer: twin-driven grouping,
// 3C planning, delivery and QoE accounting, with the proposed scheme and the
// fixed-twin and hierarchical-Q baselines.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ndt/learners/autoencoder.hpp"
#include "ndt/learners/qagent.hpp"
#include "ndt/msvs/plan.hpp"
#include "ndt/msvs/qoe.hpp"
#include "ndt/physnet.hpp"
#include "ndt/rng.hpp"
#include "ndt/sim/kernel.hpp"
#include "ndt/twin/abstraction.hpp"
#include "ndt/twin/detector.hpp"
#include "ndt/twin/idt.hpp"
#include "ndt/twin/sdt.hpp"
#include "ndt/twin/tier.hpp"
#include "ndt/twin/udt.hpp"

namespace ndt::msvs {

enum class Scheme { proposed, fixed_dt, hier_drl };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::proposed: return "proposed";
    case Scheme::fixed_dt: return "fixed-dt";
    case Scheme::hier_drl: return "hier-drl";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "proposed") return Scheme::proposed;
  if (s == "fixed-dt") return Scheme::fixed_dt;
  if (s == "hier-drl") return Scheme::hier_drl;
  throw Error(ErrorCode::invalid_config, "unknown scheme '" + s + "'");
}

inline learners::PredictorHyper default_twin_predictor() {
  learners::PredictorHyper h;
  h.hidden = 8;
  h.window = 8;
  h.epochs = 40;
  h.update_epochs = 5;
  return h;
}

struct TwinLayerParams {
  /// Slots of every-slot collection before slot 0 used to train predictors.
  int preroll_slots = 24;
  learners::PredictorHyper predictor = default_twin_predictor();
  /// Records used by an incremental predictor update.
  int update_records = 16;
  twin::CollectionParams collection;
  double theta_labeled = 1.0;
  double theta_unlabeled = 5.0 * std::log(8.0);
  double twin_theta_labeled = 1.0;
  /// Slots between a trigger and the model update it causes.
  int update_duration = 1;
  int fixed_period = 8;
  int fixed_regroup_period = 50;
  int latent_dim = 4;
  int k_min = 2;
  int k_max = 8;
  double agent_epsilon = 0.05;
  int histogram_window = 30;
  double status_fill_threshold = 0.005;
  /// Population labeled error above which an update retrains the abstraction.
  double abstraction_threshold = 0.2;
  double tier_budget = 1e9;
};

struct ScenarioConfig {
  int users = 100;
  /// Per-station bandwidth shared by all slices, Hz.
  double bandwidth_hz = 2.2e6;
  Scheme scheme = Scheme::proposed;
  std::vector<physnet::DriftSpec> drift{{20, 0.6, physnet::Remap::reverse, 1}, {90, 0.6, physnet::Remap::reverse, 1}};
  QoeWeights qoe;
  double tx_power_dbm = 46.0;
  physnet::ArenaParams arena;
  physnet::PathLossParams channel;
  physnet::SwipeParams swipe;
  physnet::CatalogParams catalog;
  physnet::PopulationParams population;
  std::vector<double> ladder_bps{0.5e6, 1.0e6, 2.0e6, 4.0e6};
  double edge_capacity = 6.0;
  double margin = 0.9;
  double lookahead_s = 4.0;
  double continuation = 0.9;
  int max_prefetch_depth = 4;
  bool water_fill = true;
  double segment_s = 1.0;
  TwinLayerParams twin;
  int slicing_period = 20;
  double background_hz = 0.3e6;
  bool static_slicing = false;
  double static_share = 0.5;
  twin::SdtParams sdt;
  int validation_horizon = 5;
  double hier_epsilon = 0.1;
  double hier_alpha = 0.2;
  /// Phase index whose start draws from an otherwise unused stream; -1 = off.
  int probe_phase = -1;
};

inline void validate(const ScenarioConfig& c) {
  auto bad = [](bool ok, const std::string& key, const std::string& why) {
    require(ok, ErrorCode::invalid_config, "scenario." + key + ": " + why);
  };
  bad(c.users >= 0, "users", "must be >= 0");
  bad(c.bandwidth_hz > 0.0, "bandwidth_hz", "must be > 0");
  check_weights(c.qoe);
  bad(!c.ladder_bps.empty(), "ladder_bps", "must not be empty");
  for (std::size_t i = 0; i < c.ladder_bps.size(); ++i) {
    bad(c.ladder_bps[i] > 0.0, "ladder_bps", "rungs must be positive");
    if (i > 0) bad(c.ladder_bps[i] > c.ladder_bps[i - 1], "ladder_bps", "must be strictly increasing");
  }
  bad(c.ladder_bps.size() <= 12, "ladder_bps", "at most 12 rungs");
  bad(c.edge_capacity >= 1.0, "edge_capacity", "must cover the cheapest transcode");
  bad(c.margin > 0.0 && c.margin <= 1.0, "margin", "must be in (0, 1]");
  bad(c.continuation > 0.0 && c.continuation < 1.0, "continuation", "must be in (0, 1)");
  bad(c.max_prefetch_depth >= 1, "max_prefetch_depth", "must be >= 1");
  bad(c.segment_s > 0.0, "segment_s", "must be > 0");
  for (const auto& d : c.drift) {
    bad(d.fraction > 0.0 && d.fraction <= 1.0, "drift.fraction", "must be in (0, 1]");
    bad(d.slot >= 0, "drift.slot", "must be >= 0");
  }
  const auto& t = c.twin;
  bad(t.preroll_slots >= t.predictor.window + 1, "twin.preroll_slots", "must exceed the predictor window");
  bad(t.collection.p_min >= 1 && t.collection.p_min <= t.collection.p_max, "twin.collection", "need 1 <= p_min <= p_max");
  bad(t.collection.initial >= t.collection.p_min && t.collection.initial <= t.collection.p_max, "twin.collection.initial",
      "must lie in [p_min, p_max]");
  bad(t.collection.theta_lo <= t.collection.theta_hi, "twin.collection", "theta_lo must not exceed theta_hi");
  bad(t.update_duration >= 0, "twin.update_duration", "must be >= 0");
  bad(t.fixed_period >= 1, "twin.fixed_period", "must be >= 1");
  bad(t.fixed_regroup_period >= 1, "twin.fixed_regroup_period", "must be >= 1");
  bad(t.k_min >= 1 && t.k_min <= t.k_max, "twin.k_min", "need 1 <= k_min <= k_max");
  bad(t.latent_dim >= 1 && t.latent_dim < c.catalog.categories + 2, "twin.latent_dim", "must be in [1, feature dim)");
  bad(t.theta_labeled > 0.0 && t.theta_unlabeled > 0.0, "twin.theta", "thresholds must be positive");
  bad(c.slicing_period >= 1, "slicing_period", "must be >= 1");
  bad(c.background_hz >= 0.0, "background_hz", "must be >= 0");
  bad(c.static_share > 0.0 && c.static_share <= 1.0, "static_share", "must be in (0, 1]");
  bad(c.validation_horizon >= 1, "validation_horizon", "must be >= 1");
  bad(c.hier_epsilon >= 0.0 && c.hier_epsilon <= 1.0, "hier_epsilon", "must be in [0, 1]");
}

class MsvsWorld final : public sim::World {
 public:
  MsvsWorld(const sim::SimConfig& sc, ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        seed_(sc.seed),
        slot_s_(sc.slot_duration_s),
        mobility_(rng_stream(sc.seed, "mobility")),
        channel_(rng_stream(sc.seed, "channel")),
        content_(rng_stream(sc.seed, "content")),
        drift_(rng_stream(sc.seed, "drift")),
        explore_(rng_stream(sc.seed, "agent-explore")),
        background_(rng_stream(sc.seed, "background")),
        probe_(rng_stream(sc.seed, "probe")) {
    validate(cfg_);
    init();
  }

  int slot() const override { return slot_; }
  const std::vector<physnet::User>& users() const { return users_; }
  const std::vector<twin::UserDigitalTwin>& twins() const { return twins_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const Plan3C& plan() const { return plan_; }
  const ScenarioConfig& config() const { return cfg_; }

  void run_phase(sim::Phase p, sim::SlotEvents& ev) override {
    if (cfg_.probe_phase == static_cast<int>(p))
      for (int i = 0; i < 3; ++i) probe_();
    if (users_.empty()) return;
    switch (p) {
      case sim::Phase::collect: collect(ev); break;
      case sim::Phase::twin_predict: twin_predict(ev); break;
      case sim::Phase::detect: detect(ev); break;
      case sim::Phase::abstract: abstract(ev); break;
      case sim::Phase::operate: operate(ev); break;
      case sim::Phase::slice: slice(ev); break;
      case sim::Phase::deliver: deliver(ev); break;
      case sim::Phase::account: account(ev); break;
    }
  }

  void end_slot(sim::SlotEvents& ev, sim::SimReport& report) override {
    row_.slot = slot_;
    row_.triggers = static_cast<int>(ev.count("trigger"));
    row_.updates = static_cast<int>(ev.count("update"));
    row_.collections = static_cast<int>(ev.count("collect"));
    row_.groups = static_cast<int>(groups_.size());
    row_.msvs_share = share_;
    report.rows.push_back(row_);
    report.user_qoe.push_back(user_qoe_);
    row_ = {};
    ++slot_;
  }

 private:
  struct Playback {
    SlotComponents comp;
    double pending_startup_s = 0.0;
    double prev_bitrate = 0.0;
    std::vector<physnet::SwipeEvent> unreported;
  };

  // --- setup ------------------------------------------------------------

  void init() {
    const int n = cfg_.users;
    auto pop_rng = rng_stream(seed_, "population");
    users_ = physnet::make_population(n, cfg_.arena, cfg_.catalog, cfg_.population, pop_rng);
    stations_ = physnet::make_stations(cfg_.arena, cfg_.bandwidth_hz, cfg_.tx_power_dbm);
    cached_.assign(cfg_.ladder_bps.size(), false);
    play_.resize(static_cast<std::size_t>(n));
    swipe_rng_.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) swipe_rng_.push_back(rng_stream(seed_, "swipe").split(std::to_string(i)));
    for (auto& u : users_) u.shadowing_db = channel_.normal(0.0, cfg_.channel.shadowing_sigma_db);

    pop_det_.theta_labeled = cfg_.twin.theta_labeled;
    pop_det_.theta_unlabeled = cfg_.twin.theta_unlabeled;
    policy_ = {cfg_.twin.k_min, cfg_.twin.k_max, 8};
    k_agent_ = learners::QAgent(policy_.states(), policy_.actions(), {cfg_.twin.agent_epsilon, 0.2, 0.0});
    idt_ = twin::make_idt(stations_);
    sdt_ = twin::make_sdt(cfg_.bandwidth_hz, cfg_.sdt);
    share_ = cfg_.static_slicing ? cfg_.static_share : sdt_.incumbent_share;
    pending_share_ = share_;
    hier_top_ = learners::QAgent(idt_.params.load_states, 3, {cfg_.hier_epsilon, cfg_.hier_alpha, 0.0});
    hier_bottom_ = learners::QAgent(kRateStates, static_cast<int>(cfg_.ladder_bps.size()), {cfg_.hier_epsilon, cfg_.hier_alpha, 0.0});

    tiers_.spec(twin::TaskClass::status_fill) = {0.0, 1.0, cfg_.twin.status_fill_threshold};
    tiers_.spec(twin::TaskClass::feature_abstraction) = {0.0, 10.0, cfg_.twin.abstraction_threshold};
    tiers_.spec(twin::TaskClass::policy_synthesis) = {0.0, 2.0, -1.0};
    tiers_.budget_per_slot = cfg_.twin.tier_budget;

    if (n == 0) return;
    // Everyone starts on the population-average feed.
    std::vector<double> feed(static_cast<std::size_t>(cfg_.catalog.categories), 0.0);
    for (const auto& u : users_)
      for (std::size_t c = 0; c < feed.size(); ++c) feed[c] += u.preference[c] / n;
    group_content_ = {feed};
    assignment_.assign(static_cast<std::size_t>(n), 0);
    for (auto& u : users_) u.video = physnet::next_video(feed, cfg_.catalog, content_);

    twins_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto& t = twins_[static_cast<std::size_t>(i)];
      t.user_id = i;
      t.detector.theta_labeled = cfg_.twin.twin_theta_labeled;
      t.detector.theta_unlabeled = std::numeric_limits<double>::infinity();
      t.collection_period = fixed() ? cfg_.twin.fixed_period : cfg_.twin.collection.initial;
    }
    for (int s = -cfg_.twin.preroll_slots; s < 0; ++s) {
      step_world(s, true);
      for (int i = 0; i < n; ++i) twin::udt_ingest(twins_[static_cast<std::size_t>(i)], sample(i, s), s);
    }
    const auto init = rng_stream(seed_, "learner-init");
    for (int i = 0; i < n; ++i) {
      auto& t = twins_[static_cast<std::size_t>(i)];
      twin::udt_train(t, cfg_.twin.predictor, init.split(std::to_string(i)));
      // Stagger the first regular collections across the period.
      t.last_collection_slot = -1 - (i % t.collection_period);
    }
  }

  bool fixed() const { return cfg_.scheme == Scheme::fixed_dt; }
  bool adaptive() const { return cfg_.scheme != Scheme::fixed_dt; }

  // --- physical world ----------------------------------------------------------

  double efficiency(double gain_db, int bs) const {
    const double snr = physnet::snr_linear(stations_[static_cast<std::size_t>(bs)].tx_power_dbm, gain_db, cfg_.channel);
    return std::log2(1.0 + snr);
  }

  void step_world(int s, bool preroll) {
    for (std::size_t i = 0; i < users_.size(); ++i) {
      auto& u = users_[i];
      u = physnet::step_mobility(std::move(u), slot_s_, mobility_, cfg_.arena);
      u.shadowing_db = physnet::step_shadowing(u.shadowing_db, cfg_.channel, channel_);
      u.serving_bs = physnet::strongest_station(u.position, stations_, cfg_.channel);
      const auto& bs = stations_[static_cast<std::size_t>(u.serving_bs)];
      u.channel_gain_db = -(physnet::path_loss_db(physnet::distance(u.position, bs.position), cfg_.channel) + u.shadowing_db);
      playback(i, s, preroll);
    }
  }

  const std::vector<double>& content_for(std::size_t user) const {
    const auto g = static_cast<std::size_t>(assignment_[user]);
    return group_content_[std::min(g, group_content_.size() - 1)];
  }

  void playback(std::size_t i, int s, bool preroll) {
    auto& u = users_[i];
    auto& pb = play_[i];
    SlotComponents c;
    c.prev_bitrate_bps = pb.prev_bitrate;
    double played = 0.0;
    if (preroll) {
      played = std::min(slot_s_, u.video.length_s - u.video.elapsed_s);
      u.video.elapsed_s += played;
    } else {
      const double startup = std::min(slot_s_, pb.pending_startup_s);
      pb.pending_startup_s -= startup;
      const double avail = slot_s_ - startup;
      const double left = u.video.length_s - u.video.elapsed_s;
      played = std::min({u.buffer_s, avail, left});
      c.rebuffer_s = startup + (played < std::min(avail, left) ? std::min(avail, left) - played : 0.0);
      c.bitrate_bps = played > 0.0 ? u.buffer_bitrate : 0.0;
      u.video.elapsed_s += played;
      u.buffer_s -= played;
    }
    if (played > 0.0 || u.video.elapsed_s >= u.video.length_s) {
      if (auto e = physnet::sample_swipe(u, u.video.category, u.video.elapsed_s, swipe_rng_[i], cfg_.swipe, s)) {
        pb.unreported.push_back(*e);
        u.watch_ratio = 0.8 * u.watch_ratio + 0.2 * e->watched_duration / u.video.length_s;
        u.video = physnet::next_video(content_for(i), cfg_.catalog, content_);
        if (!preroll) {
          c.waste_s += u.buffer_s;
          const double prefix = std::min(u.prefetch_s, cfg_.segment_s);
          u.buffer_s = prefix;
          u.prefetch_s -= prefix;
          pb.pending_startup_s = cfg_.segment_s - prefix;
        }
      }
    }
    pb.comp = c;
  }

  twin::StatusRecord sample(int i, int s) {
    const auto& u = users_[static_cast<std::size_t>(i)];
    twin::StatusRecord r;
    r.slot = s;
    r.profile = {u.id, cfg_.catalog.categories};
    r.behavior.swipes = std::move(play_[static_cast<std::size_t>(i)].unreported);
    play_[static_cast<std::size_t>(i)].unreported.clear();
    r.behavior.watch_ratio = u.watch_ratio;
    r.behavior.preference = u.preference;
    r.networking = {u.position, u.channel_gain_db, u.serving_bs};
    return r;
  }

  // --- phases ----------------------------------------------------------------

  void collect(sim::SlotEvents& ev) {
    twin::begin_slot(tiers_);
    for (const auto& d : cfg_.drift) {
      if (d.slot != slot_) continue;
      const auto hit = physnet::inject_drift(users_, d, drift_);
      ev.add(sim::Phase::collect, "drift", -1, static_cast<double>(hit.size()));
    }
    step_world(slot_, false);
    collected_.clear();
    for (std::size_t i = 0; i < twins_.size(); ++i) {
      auto& t = twins_[i];
      if (!twin::collection_due(t, slot_)) continue;
      if (!t.forecast || t.forecast->slot != slot_) twin::udt_forecast(t, slot_);
      const auto res = twin::udt_ingest(t, sample(static_cast<int>(i), slot_), slot_);
      collected_.push_back({i, res});
      ev.add(sim::Phase::collect, "collect", static_cast<int>(i), res.labeled_mse.value_or(0.0));
    }
  }

  void twin_predict(sim::SlotEvents& ev) {
    int fallbacks = 0;
    for (auto& t : twins_) {
      if (t.records.back().slot == slot_) continue;
      const double err = t.detector.recent_labeled.empty() ? 1.0 : t.detector.recent_labeled.back();
      const bool heavy = fixed() || twin::select_inference_tier(tiers_, twin::TaskClass::status_fill, err).tier == twin::Tier::heavy;
      const auto& r = twin::udt_emulate(t, slot_, heavy);
      if (r.fallback && heavy) ++fallbacks;
    }
    if (fallbacks > 0) ev.add(sim::Phase::twin_predict, "predict-fallback", -1, fallbacks);
  }

  void detect(sim::SlotEvents& ev) {
    double lab_sum = 0.0;
    int lab_n = 0;
    for (auto& [i, res] : collected_) {
      if (!res.labeled_mse) continue;
      lab_sum += *res.labeled_mse;
      ++lab_n;
      if (fixed()) continue;
      auto& t = twins_[i];
      if (res.detector.triggered) {
        twin::udt_update(t, static_cast<std::size_t>(cfg_.twin.update_records));
        ev.add(sim::Phase::detect, "twin-update", static_cast<int>(i), *res.labeled_mse);
      }
      const int next = twin::adjust_collection_period(t.collection_period, *res.labeled_mse, cfg_.twin.collection);
      if (next != t.collection_period) {
        t.collection_period = next;
        ev.add(sim::Phase::detect, "period", static_cast<int>(i), next);
      }
    }
    std::optional<double> labeled;
    if (lab_n > 0) labeled = lab_sum / lab_n;
    std::optional<double> entropy;
    if (clustering_.k() > 1) {
      const Eigen::MatrixXd lat = latents();
      double h = 0.0;
      for (Eigen::Index r = 0; r < lat.rows(); ++r)
        h += twin::assignment_entropy(clustering_, lat.row(r).transpose(), temperature_);
      entropy = h / static_cast<double>(lat.rows());
    }
    row_.labeled_error = labeled.value_or(0.0);
    row_.unlabeled_error = entropy.value_or(0.0);
    if (fixed() || (!labeled && !entropy)) return;
    if (labeled && *labeled > cfg_.twin.abstraction_threshold) recent_labeled_peak_ = std::max(recent_labeled_peak_, *labeled);
    const auto r = twin::accumulate_error(pop_det_, labeled, entropy);
    if (!r.triggered) return;
    ev.add(sim::Phase::detect, "trigger", -1, r.labeled ? 1.0 : 2.0, r.labeled ? "labeled" : "unlabeled");
    if (r.labeled) last_labeled_trigger_ = slot_;
    for (auto& t : twins_) {
      t.collection_period = cfg_.twin.collection.p_min;
      t.refresh = true;
    }
    if (!update_at_) update_at_ = slot_ + cfg_.twin.update_duration;
  }

  Eigen::MatrixXd latents() const {
    const Eigen::MatrixXd f = twin::behavior_features(twins_);
    return ae_.encoder.size() != 0 ? Eigen::MatrixXd(f * ae_.encoder.transpose()) : f;
  }

  void abstract(sim::SlotEvents& ev) {
    bool regroup = false;
    twin::AbstractionOptions opt;
    opt.latent_dim = cfg_.twin.latent_dim;
    opt.policy = policy_;
    if (slot_ == 0) {
      regroup = true;
    } else if (adaptive() && update_at_ && *update_at_ <= slot_) {
      regroup = true;
      const auto d = twin::select_inference_tier(tiers_, twin::TaskClass::feature_abstraction, recent_labeled_peak_);
      if (d.tier == twin::Tier::light) {
        opt.update_autoencoder = false;
        opt.fixed_k = k_;
      }
      update_at_.reset();
      recent_labeled_peak_ = 0.0;
    } else if (fixed() && slot_ % cfg_.twin.fixed_regroup_period == 0) {
      regroup = true;
      opt.update_autoencoder = false;
      opt.fixed_k = k_;
    }
    if (regroup) {
      opt.events_since = histogram_since();
      auto rng = explore_.split("abstraction-" + std::to_string(slot_));
      const auto res = twin::abstract_features(twins_, k_agent_, ae_, rng, opt);
      groups_ = res.groups;
      assignment_ = res.assignment;
      clustering_ = res.clustering;
      temperature_ = res.temperature;
      k_ = res.k;
      swipe_dists_ = res.swipe_dists;
      refresh_content();
      for (std::size_t i = 0; i < users_.size(); ++i) {
        play_[i].comp.waste_s += users_[i].prefetch_s;
        users_[i].prefetch_s = 0.0;
      }
      last_update_ = slot_;
      ev.add(sim::Phase::abstract, "update", -1, res.k, opt.fixed_k > 0 ? "light" : "heavy");
    } else if (adaptive()) {
      const int since = histogram_since();
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto e = twin::group_events(twins_, groups_[g], since);
        swipe_dists_[g] = twin::swipe_distribution(e, opt.bin_edges);
      }
      refresh_content();
    }
  }

  int histogram_since() const {
    return std::max(slot_ - cfg_.twin.histogram_window, last_labeled_trigger_);
  }

  void refresh_content() {
    group_content_.assign(groups_.size(), std::vector<double>(static_cast<std::size_t>(cfg_.catalog.categories), 0.0));
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      auto& c = group_content_[g];
      for (int m : groups_[g]) {
        const auto& p = twins_[static_cast<std::size_t>(m)].latest().behavior.preference;
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += p[j];
      }
      const double s = std::accumulate(c.begin(), c.end(), 0.0);
      for (auto& v : c) v /= s;
    }
  }

  std::vector<GroupDemand> demands() const {
    std::vector<GroupDemand> d;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      GroupDemand gd;
      gd.size = static_cast<int>(groups_[g].size());
      gd.worst_efficiency = std::numeric_limits<double>::infinity();
      for (int m : groups_[g]) {
        const auto& net = twins_[static_cast<std::size_t>(m)].latest().networking;
        gd.worst_efficiency = std::min(gd.worst_efficiency, efficiency(net.channel_gain_db, net.serving_bs));
      }
      gd.swipe_dist = swipe_dists_[g];
      d.push_back(std::move(gd));
    }
    return d;
  }

  twin::ReplaySnapshot snapshot(const std::vector<GroupDemand>& d) const {
    twin::ReplaySnapshot s;
    s.slot = slot_;
    s.quota_hz = share_ * cfg_.bandwidth_hz;
    s.ladder_bps = cfg_.ladder_bps;
    s.alpha = cfg_.qoe.alpha;
    s.beta = cfg_.qoe.beta;
    s.slot_s = slot_s_;
    s.margin = cfg_.margin;
    for (const auto& g : d) s.groups.push_back({g.size, g.worst_efficiency});
    return s;
  }

  PlanParams plan_params() const {
    PlanParams p;
    p.ladder_bps = cfg_.ladder_bps;
    p.capacity = cfg_.edge_capacity;
    p.cached = cached_;
    p.margin = cfg_.margin;
    p.eta = idt_.incumbent.eta;
    p.water_fill = cfg_.water_fill;
    p.lookahead_s = cfg_.lookahead_s;
    p.continuation = cfg_.continuation;
    p.max_depth = cfg_.max_prefetch_depth;
    p.weights = cfg_.qoe;
    p.slot_s = slot_s_;
    return p;
  }

  static constexpr int kRateStates = 8;

  int rate_state(double rate_bps) const {
    const double x = std::log2(std::max(rate_bps, 1.0) / cfg_.ladder_bps.front());
    return std::clamp(static_cast<int>(std::floor(x + 2.0)), 0, kRateStates - 1);
  }

  void operate(sim::SlotEvents& ev) {
    std::vector<twin::StationReport> rep;
    std::vector<double> load(stations_.size(), 0.0);
    for (const auto& u : users_) load[static_cast<std::size_t>(u.serving_bs)] += 1.0;
    for (const auto& s : stations_)
      rep.push_back({s.id, load[static_cast<std::size_t>(s.id)], share_ * cfg_.bandwidth_hz, s.tx_power_dbm});
    const auto mu = twin::idt_mirror_update(idt_, rep, slot_);
    if (mu.detector.triggered) ev.add(sim::Phase::operate, "idt-trigger", -1, *mu.labeled_error);

    const auto d = demands();
    twin::idt_record_snapshot(idt_, snapshot(d));
    const double quota = share_ * cfg_.bandwidth_hz;
    idt_decided_ = false;
    if (cfg_.scheme == Scheme::hier_drl) {
      plan_ = hier_plan(d, quota);
    } else {
      const auto tier = twin::select_inference_tier(tiers_, twin::TaskClass::policy_synthesis, 0.0);
      if (tier.tier == twin::Tier::heavy) {
        const double before = idt_.incumbent.eta;
        const auto dec = twin::idt_operate(idt_, cfg_.validation_horizon, idt_explore_, rng_stream(seed_, "replay").split(std::to_string(slot_)));
        idt_decided_ = true;
        if (dec.policy.eta != before) ev.add(sim::Phase::operate, "policy", -1, dec.policy.eta);
      }
      plan_ = plan_3c(d, quota, plan_params());
      row_.split_eta = idt_.incumbent.eta;
    }
    row_.transcode_cost = plan_.transcode_cost;
    if (slot_ == 0) ev.add(sim::Phase::operate, "pause", -1, 0.0, "initial inference");
  }

  Plan3C hier_plan(const std::vector<GroupDemand>& d, double quota) {
    hier_state_ = twin::idt_state(idt_);
    hier_action_ = hier_top_.select(hier_state_, hier_explore_);
    const double eta = 0.5 * hier_action_;
    row_.split_eta = eta;
    const auto share = proportional_split(d, quota, eta);
    std::vector<int> chosen(d.size());
    hier_group_states_.assign(d.size(), 0);
    for (std::size_t g = 0; g < d.size(); ++g) {
      hier_group_states_[g] = rate_state(share[g] * d[g].worst_efficiency);
      chosen[g] = hier_bottom_.select(hier_group_states_[g], hier_explore_);
    }
    double cost = 0.0;
    const auto rungs = fit_capacity(chosen, d, cached_, cfg_.edge_capacity, cfg_.ladder_bps.size(), &cost);
    Plan3C p;
    p.transcode_cost = cost;
    const auto params = plan_params();
    for (std::size_t g = 0; g < d.size(); ++g) {
      GroupPlan gp;
      gp.rung = rungs[g];
      gp.bitrate_bps = cfg_.ladder_bps[static_cast<std::size_t>(gp.rung)];
      gp.bandwidth_hz = share[g];
      gp.transcode = !cached_[static_cast<std::size_t>(gp.rung)];
      gp.infeasible = !sustainable(gp.bitrate_bps, share[g], d[g].worst_efficiency, cfg_.margin);
      gp.prefetch_depth = prefetch_depth(d[g].swipe_dist, params);
      p.bandwidth_used += share[g];
      p.utility += d[g].size * bitrate_utility(gp.bitrate_bps, params.weights);
      p.groups.push_back(gp);
    }
    return p;
  }

  void slice(sim::SlotEvents& ev) {
    share_ = pending_share_;
    bg_demand_ = cfg_.background_hz * background_.uniform(0.9, 1.1);
    const double served = bg_demand_ > 0.0 ? std::min(1.0, (1.0 - share_) * cfg_.bandwidth_hz / bg_demand_) : 1.0;
    bg_served_sum_ += served;
    if (cfg_.static_slicing) {
      pending_share_ = cfg_.static_share;
      return;
    }
    if (slot_ == 0 || slot_ % cfg_.slicing_period != 0) return;
    twin::SliceDemand demand;
    demand.msvs = snapshot(demands());
    demand.background_hz = bg_demand_;
    if (slice_slots_ > 0) {
      const double reward = qoe_sum_ / slice_slots_ + sdt_.params.background_weight * bg_served_sum_ / slice_slots_;
      twin::sdt_feedback(sdt_, reward, demand, sdt_explore_);
    }
    qoe_sum_ = 0.0;
    bg_served_sum_ = 0.0;
    slice_slots_ = 0;
    const auto cfg = twin::slice_allocate(sdt_, demand, sdt_explore_, rng_stream(seed_, "replay").split("slice-" + std::to_string(slot_)));
    pending_share_ = cfg.msvs_share;
    ev.add(sim::Phase::slice, "slice", -1, cfg.msvs_share, cfg.validation.accepted ? "accepted" : "rejected");
  }

  void deliver(sim::SlotEvents& ev) {
    std::fill(cached_.begin(), cached_.end(), false);
    hier_rewards_.assign(plan_.groups.size(), 0.0);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& gp = plan_.groups[g];
      cached_[static_cast<std::size_t>(gp.rung)] = true;
      if (slot_ == 0) continue;  // transmission paused during initial inference
      std::vector<double> snr;
      snr.reserve(groups_[g].size());
      for (int m : groups_[g]) {
        const auto& u = users_[static_cast<std::size_t>(m)];
        snr.push_back(physnet::snr_linear(stations_[static_cast<std::size_t>(u.serving_bs)].tx_power_dbm, u.channel_gain_db, cfg_.channel));
      }
      const auto out = physnet::multicast_deliver(snr, gp.bitrate_bps, gp.bandwidth_hz, slot_s_);
      for (int m : groups_[g])
        physnet::credit_delivery(users_[static_cast<std::size_t>(m)], out, gp.bitrate_bps, gp.prefetch_depth * cfg_.segment_s);
      const double f = out.delivered_s / slot_s_;
      hier_rewards_[g] = bitrate_utility(gp.bitrate_bps, cfg_.qoe) * f - cfg_.qoe.beta * slot_s_ * (1.0 - f);
      ev.add(sim::Phase::deliver, "deliver", static_cast<int>(g), out.delivered_s);
    }
  }

  void account(sim::SlotEvents&) {
    const std::size_t n = users_.size();
    user_qoe_.assign(n, 0.0);
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& pb = play_[i];
      const auto terms = qoe_terms(pb.comp, cfg_.qoe);
      user_qoe_[i] = terms.total;
      q += terms.total;
      row_.mean_utility += terms.utility;
      row_.mean_bitrate_bps += pb.comp.bitrate_bps;
      row_.mean_rebuffer_s += terms.rebuffer;
      row_.mean_switch += terms.switching;
      row_.mean_waste_s += terms.waste;
      pb.prev_bitrate = pb.comp.bitrate_bps;
    }
    const double dn = static_cast<double>(n);
    row_.mean_qoe = q / dn;
    row_.mean_utility /= dn;
    row_.mean_bitrate_bps /= dn;
    row_.mean_rebuffer_s /= dn;
    row_.mean_switch /= dn;
    row_.mean_waste_s /= dn;
    twin::sdt_observe(sdt_, row_.mean_qoe);
    qoe_sum_ += row_.mean_qoe;
    ++slice_slots_;
    if (cfg_.scheme == Scheme::hier_drl) {
      hier_top_.update(hier_state_, hier_action_, row_.mean_qoe, twin::idt_state(idt_), hier_explore_);
      if (slot_ > 0)
        for (std::size_t g = 0; g < hier_rewards_.size(); ++g) {
          const int a = plan_.groups[g].rung;
          hier_bottom_.update(hier_group_states_[g], a, hier_rewards_[g], hier_group_states_[g], hier_explore_);
        }
    } else if (idt_decided_) {
      twin::idt_feedback(idt_, row_.mean_qoe, idt_explore_);
    }
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  double slot_s_;
  int slot_ = 0;

  RandomStream mobility_, channel_, content_, drift_, explore_, background_, probe_;
  RandomStream idt_explore_ = explore_.split("idt");
  RandomStream sdt_explore_ = explore_.split("sdt");
  RandomStream hier_explore_ = explore_.split("hier");
  std::vector<RandomStream> swipe_rng_;

  std::vector<physnet::User> users_;
  std::vector<physnet::BaseStation> stations_;
  std::vector<bool> cached_;
  std::vector<Playback> play_;

  std::vector<twin::UserDigitalTwin> twins_;
  struct Collected {
    std::size_t user;
    twin::IngestResult result;
  };
  std::vector<Collected> collected_;
  twin::DualErrorDetector pop_det_;
  std::optional<int> update_at_;
  int last_labeled_trigger_ = std::numeric_limits<int>::min() / 2;
  int last_update_ = 0;
  double recent_labeled_peak_ = 0.0;

  learners::ClusterCountPolicy policy_;
  learners::QAgent k_agent_;
  learners::Autoencoder ae_;
  learners::Clustering clustering_;
  double temperature_ = 1.0;
  int k_ = 1;
  std::vector<std::vector<int>> groups_;
  std::vector<int> assignment_;
  std::vector<std::vector<double>> swipe_dists_;
  std::vector<std::vector<double>> group_content_;

  twin::InfrastructureDigitalTwin idt_;
  twin::SliceDigitalTwin sdt_;
  twin::TierSelector tiers_;
  bool idt_decided_ = false;
  double share_ = 1.0;
  double pending_share_ = 1.0;
  double bg_demand_ = 0.0;
  double qoe_sum_ = 0.0;
  double bg_served_sum_ = 0.0;
  int slice_slots_ = 0;

  learners::QAgent hier_top_;
  learners::QAgent hier_bottom_;
  int hier_state_ = 0;
  int hier_action_ = 0;
  std::vector<int> hier_group_states_;
  std::vector<double> hier_rewards_;

  Plan3C plan_;
  sim::MetricsRow row_;
  std::vector<double> user_qoe_;
};

}  // namespace ndt::msvs
