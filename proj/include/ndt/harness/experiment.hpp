#pragma once

// Sweep execution: one independent run per (value, seed, scheme) cell, run on
// a small thread pool and merged in sorted order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ndt/harness/config.hpp"
#include "ndt/run.hpp"

namespace ndt::harness {

struct Cell {
  double value = 0.0;
  std::uint64_t seed = 0;
  msvs::Scheme scheme = msvs::Scheme::proposed;
};

struct RunRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  double mean_qoe = 0.0;
  int triggers = 0;
  int updates = 0;
  bool ok = true;
  std::string error;

  friend bool operator==(const RunRow&, const RunRow&) = default;
};

struct AggregateRow {
  double value = 0.0;
  std::string scheme;
  int runs = 0;
  double mean_qoe = 0.0;
  /// Sample standard deviation over runs; 0 for a single run.
  double std_qoe = 0.0;
  double mean_triggers = 0.0;
  double mean_updates = 0.0;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct SlotRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  sim::MetricsRow metrics;

  friend bool operator==(const SlotRow&, const SlotRow&) = default;
};

struct EventRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  sim::Event event;

  friend bool operator==(const EventRow&, const EventRow&) = default;
};

struct SweepReport {
  /// Dotted config path of the swept parameter; empty without a sweep.
  std::string axis;
  std::vector<RunRow> runs;
  std::vector<AggregateRow> aggregate;
  std::vector<SlotRow> slots;
  std::vector<EventRow> events;

  bool all_ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunRow& r) { return r.ok; });
  }
};

/// Event kinds kept in exports; per-user bookkeeping events are dropped.
inline bool exported_event(const std::string& kind) {
  return kind != "collect" && kind != "deliver" && kind != "period" && kind != "twin-update";
}

inline std::vector<Cell> experiment_cells(const ExperimentSpec& spec) {
  std::vector<double> values;
  if (spec.sweep) {
    values = spec.sweep->values;
  } else {
    values = {0.0};
  }
  std::vector<Cell> cells;
  for (double v : values)
    for (auto seed : spec.seeds)
      for (auto s : spec.schemes) cells.push_back({v, seed, s});
  auto key = [](const Cell& c) { return std::make_tuple(c.value, c.seed, std::string(msvs::to_string(c.scheme))); };
  std::stable_sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) { return key(a) < key(b); });
  return cells;
}

struct CellResult {
  RunRow row;
  std::vector<SlotRow> slots;
  std::vector<EventRow> events;
};

inline CellResult run_cell(const ExperimentSpec& spec, const Cell& cell) {
  CellResult out;
  out.row.value = cell.value;
  out.row.seed = cell.seed;
  out.row.scheme = msvs::to_string(cell.scheme);
  try {
    const auto doc = spec.sweep ? with_value(spec.base, spec.sweep->path, cell.value) : spec.base;
    auto [sc, cfg] = configs_from_document(doc);
    sc.seed = cell.seed;
    cfg.scheme = cell.scheme;
    const auto report = run(sc, cfg);
    double q = 0.0;
    for (const auto& r : report.rows) {
      q += r.mean_qoe;
      out.row.triggers += r.triggers;
      out.row.updates += r.updates;
      out.slots.push_back({cell.value, cell.seed, out.row.scheme, r});
    }
    out.row.mean_qoe = q / static_cast<double>(report.rows.size());
    for (const auto& e : report.events)
      if (exported_event(e.kind)) out.events.push_back({cell.value, cell.seed, out.row.scheme, e});
  } catch (const std::exception& e) {
    out.row.ok = false;
    out.row.error = e.what();
    out.slots.clear();
    out.events.clear();
  }
  return out;
}

inline std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs) {
  std::map<std::pair<double, std::string>, std::vector<const RunRow*>> by;
  for (const auto& r : runs)
    if (r.ok) by[{r.value, r.scheme}].push_back(&r);
  std::vector<AggregateRow> out;
  for (const auto& [key, rows] : by) {
    AggregateRow a;
    a.value = key.first;
    a.scheme = key.second;
    a.runs = static_cast<int>(rows.size());
    for (const auto* r : rows) {
      a.mean_qoe += r->mean_qoe;
      a.mean_triggers += r->triggers;
      a.mean_updates += r->updates;
    }
    const double n = static_cast<double>(rows.size());
    a.mean_qoe /= n;
    a.mean_triggers /= n;
    a.mean_updates /= n;
    if (rows.size() > 1) {
      double ss = 0.0;
      for (const auto* r : rows) ss += (r->mean_qoe - a.mean_qoe) * (r->mean_qoe - a.mean_qoe);
      a.std_qoe = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(a);
  }
  return out;
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline SweepReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {}) {
  const auto cells = experiment_cells(spec);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      results[i] = run_cell(spec, cells[i]);
      const auto d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, cells.size());
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, spec.parallel)), cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepReport report;
  report.axis = spec.sweep ? spec.sweep->path : std::string{};
  for (auto& r : results) {
    report.runs.push_back(std::move(r.row));
    std::move(r.slots.begin(), r.slots.end(), std::back_inserter(report.slots));
    std::move(r.events.begin(), r.events.end(), std::back_inserter(report.events));
  }
  report.aggregate = aggregate_runs(report.runs);
  return report;
}

}  // namespace ndt::harness
