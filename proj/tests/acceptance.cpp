// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ndt/harness/config.hpp"
#include "ndt/harness/experiment.hpp"
#include "ndt/harness/export.hpp"
#include "ndt/learners/autoencoder.hpp"
#include "ndt/learners/kmeans.hpp"
#include "ndt/learners/predictor.hpp"
#include "ndt/learners/qagent.hpp"
#include "ndt/msvs/plan.hpp"
#include "ndt/run.hpp"
#include "ndt/twin/detector.hpp"
#include "test_util.hpp"

using namespace ndt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool ok, const char* id, const std::string& what) {
  std::printf("%s  %s  %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path config_path(const char* name) { return fs::path(NDT_CONFIG_DIR) / name; }

// --- 1: drift response -------------------------------------------------------

void drift_response() {
  const auto spec = harness::parse_config(config_path("drift.json"));
  const int drifts[] = {20, 90};
  int trigger_ok[2] = {0, 0};
  double pre_sum[2] = {0, 0}, post_sum[2] = {0, 0};
  int recovered[2] = {0, 0};
  int seeds = 0;
  double slowest = 0.0;
  for (auto seed : spec.seeds) {
    auto [sc, cfg] = harness::configs_from_document(spec.base);
    sc.seed = seed;
    cfg.scheme = msvs::Scheme::proposed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = run(sc, cfg);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    ++seeds;
    auto window_mean = [&](int from, int to) {
      double s = 0.0;
      int n = 0;
      for (int t = std::max(0, from); t <= std::min(to, static_cast<int>(report.rows.size()) - 1); ++t, ++n)
        s += report.rows[static_cast<std::size_t>(t)].mean_qoe;
      return n ? s / n : std::numeric_limits<double>::quiet_NaN();
    };
    for (int k = 0; k < 2; ++k) {
      const int d = drifts[k];
      bool fired = false;
      int update = -1;
      for (const auto& e : report.events) {
        if (e.kind == "trigger" && e.slot >= d && e.slot <= d + 5) fired = true;
        if (e.kind == "update" && e.slot >= d && update < 0) update = e.slot;
      }
      trigger_ok[k] += fired ? 1 : 0;
      const double pre = window_mean(d - 20, d - 1);
      const double post = update >= 0 ? window_mean(update, update + 30) : -std::numeric_limits<double>::infinity();
      pre_sum[k] += pre;
      post_sum[k] += post;
      recovered[k] += post >= 0.9 * pre ? 1 : 0;
    }
  }
  for (int k = 0; k < 2; ++k) {
    verdict(trigger_ok[k] >= 9, "1a",
            fmt("drift at slot %d: trigger within 5 slots in %d/%d seeds (need >= 9/10)", drifts[k], trigger_ok[k], seeds));
    const double pre = pre_sum[k] / seeds, post = post_sum[k] / seeds;
    verdict(post >= 0.9 * pre, "1b",
            fmt("drift at slot %d: post-update 31-slot mean QoE %.4f vs pre-drift 20-slot mean %.4f, ratio %.3f (need >= 0.9); "
                "per-seed recovered %d/%d",
                drifts[k], post, pre, post / pre, recovered[k], seeds));
  }
  verdict(slowest <= 60.0, "1c", fmt("slowest run %.2f s (need <= 60 s)", slowest));
}

// --- 2 and 3: bandwidth sweep ----------------------------------------------

void bandwidth_sweep() {
  auto spec = harness::parse_config(config_path("bandwidth_sweep.json"));
  spec.parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto report = harness::run_experiment(spec);
  verdict(report.all_ok(), "2a", fmt("%zu sweep runs completed without error", report.runs.size()));

  std::map<double, std::map<std::string, double>> mean;
  for (const auto& a : report.aggregate) mean[a.value][a.scheme] = a.mean_qoe;
  bool ordered = true;
  std::string table;
  for (const auto& [bw, m] : mean) {
    ordered = ordered && m.at("proposed") >= m.at("fixed-dt");
    table += fmt(" %.1fMHz:%.4f/%.4f/%.4f", bw / 1e6, m.at("proposed"), m.at("fixed-dt"), m.at("hier-drl"));
  }
  verdict(ordered, "2b", "proposed >= fixed-dt mean QoE at every point (proposed/fixed-dt/hier-drl)" + table);

  const double top = mean.rbegin()->first;
  std::map<std::uint64_t, std::map<std::string, double>> paired;
  for (const auto& r : report.runs)
    if (r.ok && r.value == top) paired[r.seed][r.scheme] = r.mean_qoe;
  int wins = 0;
  for (const auto& [seed, m] : paired) wins += m.at("proposed") > m.at("hier-drl") ? 1 : 0;
  const double gap = (mean[top].at("proposed") - mean[top].at("hier-drl")) / mean[top].at("hier-drl");
  verdict(wins >= 8, "2c",
          fmt("proposed > hier-drl at %.1f MHz in %d/%zu paired seeds (need >= 8/10); measured gap %.1f%% "
              "(reference gap 10.3%%)",
              top / 1e6, wins, paired.size(), 100.0 * gap));

  std::vector<double> q;
  for (const auto& [bw, m] : mean) q.push_back(m.at("proposed"));
  bool monotone = true;
  for (std::size_t i = 1; i < q.size(); ++i) monotone = monotone && q[i] >= q[i - 1];
  double second = 0.0;
  for (std::size_t i = 2; i < q.size(); ++i) second += q[i] - 2 * q[i - 1] + q[i - 2];
  second /= static_cast<double>(q.size() - 2);
  std::string inc;
  for (std::size_t i = 1; i < q.size(); ++i) inc += fmt(" %+.4f", q[i] - q[i - 1]);
  verdict(monotone && second <= 0.0, "3",
          fmt("proposed non-decreasing over the sweep (increments%s), mean second difference %.4f (need <= 0)",
              inc.c_str(), second));
}

// --- 4: learner oracles ------------------------------------------------------

void predictor_oracles() {
  using namespace learners;
  std::vector<Vector> s;
  for (int t = 0; t < 400; ++t) s.push_back(Vector::Constant(1, std::sin(2 * std::numbers::pi * t / 40.0)));
  auto p = train_predictor(std::span<const Vector>(s).first(300), PredictorHyper{}, rng_stream(2, "learner-init"));
  const auto w = static_cast<std::size_t>(p.window());
  double se = 0.0;
  int n = 0;
  for (std::size_t t = 300; t < s.size(); ++t, ++n) se += (predict_next(p, std::span<const Vector>(s).subspan(t - w, w)) - s[t]).squaredNorm();
  const double nrmse = std::sqrt(se / n) / std::sqrt(0.5);
  verdict(nrmse < 0.1, "4a", fmt("predictor held-out sine NRMSE %.4f (need < 0.1)", nrmse));

  PredictorHyper h;
  h.hidden = 5;
  h.window = 4;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SequencePredictor q(3, h, rng_stream(seed, "learner-init"));
    auto rng = rng_stream(seed, "data");
    for (auto* v : {&q.params().bz, &q.params().bh, &q.params().bo})
      for (auto& x : *v) x = rng.uniform(-0.5, 0.5);
    std::vector<Vector> window(4, Vector(3));
    for (auto& x : window)
      for (auto& e : x) e = rng.normal();
    Vector target(3);
    for (auto& e : target) e = rng.normal();
    GruParams grad, scratch;
    q.loss_and_gradient(window, target, grad);
    const auto g = grad.flatten();
    auto theta = q.params().flatten();
    const double eps = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double orig = theta[i];
      theta[i] = orig + eps;
      q.params().unflatten(theta);
      const double lp = q.loss_and_gradient(window, target, scratch);
      theta[i] = orig - eps;
      q.params().unflatten(theta);
      const double lm = q.loss_and_gradient(window, target, scratch);
      theta[i] = orig;
      q.params().unflatten(theta);
      const double fd = (lp - lm) / (2 * eps);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
    }
  }
  verdict(worst < 1e-4, "4b", fmt("predictor gradient vs central differences, worst relative error %.2e (need < 1e-4)", worst));
}

void autoencoder_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto rng = rng_stream(seed, "data");
    const int n = 200, d = 6;
    Eigen::MatrixXd data(n, d);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.normal();
    for (int c = 0; c < d; ++c) data.col(c) *= 1.0 + c;
    const double oracle = oracle::rank_projection_error(data, d - 1);
    auto ae = learners::train_autoencoder(data, d - 1, rng_stream(seed, "learner-init"));
    worst = std::max(worst, learners::reconstruction_error(ae, data) / oracle);
  }
  verdict(worst <= 1.5, "4c", fmt("autoencoder reconstruction / rank-m projection oracle, worst %.4f (need <= 1.5)", worst));
}

void kmeans_oracle() {
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = rng_stream(seed, "blobs");
    std::vector<int> labels;
    const auto pts = oracle::planted_blobs(40, 3, 2, 8.0, rng, labels);
    const auto cl = learners::kmeans_cluster(pts, 3, rng);
    worst = std::min(worst, oracle::adjusted_rand_index(labels, cl.assignment));
  }
  verdict(worst >= 0.9, "4d", fmt("k-means++ planted blobs at 8 sigma, worst ARI over 20 seeds %.4f (need >= 0.9)", worst));
}

void double_q_oracle() {
  const double gamma = 0.9;
  const double mean_r[2][2] = {{0.1, 0.0}, {0.0, 0.6}};
  const double p_intended = 0.8;
  auto p_next = [&](int a, int s_next) { return s_next == a ? p_intended : 1 - p_intended; };
  double v[2] = {0, 0}, qv[2][2] = {};
  for (int it = 0; it < 2000; ++it) {
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) qv[s][a] = mean_r[s][a] + gamma * (p_next(a, 0) * v[0] + p_next(a, 1) * v[1]);
    for (int s = 0; s < 2; ++s) v[s] = std::max(qv[s][0], qv[s][1]);
  }
  const int optimal[2] = {qv[0][1] > qv[0][0] ? 1 : 0, qv[1][1] > qv[1][0] ? 1 : 0};
  int matches = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = rng_stream(seed, "mdp");
    learners::QAgent q(2, 2, {1.0, 0.05, gamma});
    int s = 0;
    for (int i = 0; i < 10000; ++i) {
      const int a = q.select(s, rng);
      const int s_next = rng.uniform() < p_intended ? a : 1 - a;
      const double r = rng.uniform() < mean_r[s][a] ? 1.0 : 0.0;
      learners::q_update(q, s, a, r, s_next, rng);
      s = s_next;
    }
    matches += q.greedy(0) == optimal[0] && q.greedy(1) == optimal[1];
  }
  verdict(matches >= 9, "4e", fmt("double-Q greedy policy equals value iteration in %d/10 seeds (need >= 9)", matches));
}

void plan_oracle() {
  using namespace msvs;
  auto rng = rng_stream(11, "plan-oracle");
  const double ladder[] = {0.5e6, 1e6, 2e6, 4e6};
  double worst = 0.0;
  int compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    PlanParams p;
    p.cached = {rng.uniform() < 0.25, rng.uniform() < 0.25, rng.uniform() < 0.25, rng.uniform() < 0.25};
    p.capacity = 1.0 + static_cast<double>(rng.index(8));
    p.water_fill = rng.uniform() < 0.5;
    const std::vector<GroupDemand> g{{1 + static_cast<int>(rng.index(20)), rng.uniform(0.3, 10.0), {}},
                                     {1 + static_cast<int>(rng.index(20)), rng.uniform(0.3, 10.0), {}}};
    const auto plan = plan_3c(g, rng.uniform(0.1e6, 2.5e6), p);
    double best = -std::numeric_limits<double>::infinity();
    for (int r1 = 0; r1 < 4; ++r1) {
      for (int r2 = 0; r2 < 4; ++r2) {
        const int r[2] = {r1, r2};
        bool ok = true;
        for (std::size_t i = 0; i < 2; ++i) {
          const double rate = 0.9 * plan.groups[i].bandwidth_hz * g[i].worst_efficiency;
          ok = ok && (ladder[0] <= rate ? ladder[r[i]] <= rate : r[i] == 0);
        }
        double cost = 0.0;
        for (int rung = 0; rung < 4; ++rung)
          if ((r1 == rung || r2 == rung) && !p.cached[static_cast<std::size_t>(rung)]) cost += rung + 1;
        if (!ok || cost > p.capacity) continue;
        best = std::max(best, g[0].size * std::log(1.0 + ladder[r1] / 0.5e6) + g[1].size * std::log(1.0 + ladder[r2] / 0.5e6));
      }
    }
    if (!std::isfinite(best)) continue;
    ++compared;
    worst = std::max(worst, std::abs(plan.utility - best));
  }
  verdict(worst <= 1e-9, "4f",
          fmt("3C plan vs exhaustive rung enumeration at the plan's split, %d instances, worst |diff| %.2e (need <= 1e-9)",
              compared, worst));
}

// --- 5: detector and scheduler ----------------------------------------------

void detector_properties() {
  using namespace twin;
  const double h1 = unlabeled_error(std::vector<double>{1, 0, 0});
  const double h2 = unlabeled_error(std::vector<double>{0.5, 0.5});
  const double h4 = unlabeled_error(std::vector<double>(4, 0.25));
  verdict(h1 == 0.0 && std::abs(h2 - std::log(2.0)) <= 1e-15 && std::abs(h4 - std::log(4.0)) <= 1e-15, "5a",
          fmt("entropy of trivial distributions %.17g / %.17g / %.17g (expect 0 / ln 2 / ln 4)", h1, h2, h4));

  bool ok = true;
  {
    DualErrorDetector d;
    d.theta_labeled = 1.0;
    ok = ok && !accumulate_error(d, 0.4, std::nullopt).triggered && !accumulate_error(d, 0.4, std::nullopt).triggered;
    const auto r = accumulate_error(d, 0.4, std::nullopt);
    ok = ok && r.triggered && r.labeled && d.labeled_acc == 0.0 && d.unlabeled_acc == 0.0;
  }
  {
    DualErrorDetector d;
    d.theta_labeled = 1.0;
    ok = ok && !accumulate_error(d, 0.5, std::nullopt).triggered && !accumulate_error(d, 0.5, std::nullopt).triggered;
    ok = ok && accumulate_error(d, 1e-9, std::nullopt).triggered;
  }
  for (int k = 2; k <= 16; ++k) {
    DualErrorDetector d;
    d.theta_unlabeled = 5 * std::log(static_cast<double>(k));
    const double h = unlabeled_error(std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
    int first = 0;
    for (int i = 1; i <= 10 && first == 0; ++i)
      if (accumulate_error(d, std::nullopt, h).triggered) first = i;
    ok = ok && first == 6 && d.unlabeled_acc == 0.0 && d.labeled_acc == 0.0;
  }
  {
    DualErrorDetector d;
    for (int i = 0; i < 100000 && ok; ++i) ok = !accumulate_error(d, 0.0, 0.0).triggered;
  }
  verdict(ok, "5b", "cumulative trigger crosses at the expected index, equality does not trigger, both sums reset to 0");

  CollectionParams cp;
  int wrong = 0, checked = 0;
  for (int period = 1; period <= 32; ++period) {
    const int halved = std::max(1, period / 2), doubled = std::min(32, period * 2);
    const std::pair<double, int> cases[] = {{1.0, halved}, {0.2000001, halved}, {0.0, doubled}, {0.0199999, doubled},
                                            {0.02, period}, {0.05, period},     {0.1, period}, {0.2, period}};
    for (const auto& [mse, expect] : cases) {
      wrong += adjust_collection_period(period, mse, cp) != expect ? 1 : 0;
      ++checked;
    }
  }
  verdict(wrong == 0, "5c", fmt("collection period halve/double/clamp table over periods 1..32: %d/%d cases match", checked - wrong, checked));
}

// --- 6: determinism ----------------------------------------------------------

std::map<std::string, std::string> export_bytes(const harness::ExperimentSpec& spec, const fs::path& dir) {
  fs::remove_all(dir);
  const auto report = harness::run_experiment(spec);
  std::map<std::string, std::string> out;
  for (const auto& p : harness::export_metrics(report, dir, spec.formats)) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[p.filename().string()] = ss.str();
  }
  return out;
}

void determinism() {
  auto spec = harness::parse_config(config_path("quick.json"));
  spec.sweep = harness::SweepAxis{"scenario.bandwidth_hz", {1.4e6, 2.2e6}};
  spec.seeds = {1, 2};
  spec.schemes = {msvs::Scheme::proposed, msvs::Scheme::fixed_dt, msvs::Scheme::hier_drl};
  spec.formats = {harness::Format::csv, harness::Format::jsonl};
  const auto root = fs::temp_directory_path() / "ndt-acceptance";
  spec.parallel = 1;
  const auto a = export_bytes(spec, root / "serial-a");
  const auto b = export_bytes(spec, root / "serial-b");
  spec.parallel = 4;
  const auto c = export_bytes(spec, root / "parallel");
  fs::remove_all(root);
  std::size_t bytes = 0;
  for (const auto& [name, text] : a) bytes += text.size();
  verdict(!a.empty() && a == b, "6a", fmt("rerun exports byte-identical (%zu files, %zu bytes)", a.size(), bytes));
  verdict(!a.empty() && a == c, "6b", "4-thread sweep exports byte-identical to the serial sweep");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  detector_properties();
  predictor_oracles();
  autoencoder_oracle();
  kmeans_oracle();
  double_q_oracle();
  plan_oracle();
  determinism();
  drift_response();
  bandwidth_sweep();
  std::printf("%d criterion line(s) failed, %.1f s\n", failures,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return failures ? 1 : 0;
}
