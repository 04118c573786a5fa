#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include "ndt/harness/config.hpp"
#include "ndt/harness/experiment.hpp"
#include "ndt/harness/export.hpp"

using namespace ndt;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string seeds;
  std::string scheme;
  int parallel = 0;
  std::string format;
};

// "1,2,5-8" -> {1, 2, 5, 6, 7, 8}
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    require(!item.empty(), ErrorCode::validation_error, "--seeds: empty entry in '" + text + "'");
    try {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        require(lo <= hi, ErrorCode::validation_error, "--seeds: empty range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::validation_error, "--seeds: cannot parse '" + item + "'");
    }
  }
  return out;
}

harness::ExperimentSpec load_spec(const Options& o) {
  auto spec = o.config.empty() ? harness::parse_config_text("{}") : harness::parse_config(o.config);
  if (const char* env = std::getenv("NDT_OUT_DIR"); env && *env) spec.out_dir = env;
  if (!o.out.empty()) spec.out_dir = o.out;
  if (!o.seeds.empty()) {
    spec.seeds = parse_seed_list(o.seeds);
    std::set<std::uint64_t> uniq(spec.seeds.begin(), spec.seeds.end());
    require(uniq.size() == spec.seeds.size(), ErrorCode::validation_error, "--seeds: seeds must be distinct");
  }
  if (!o.scheme.empty()) {
    try {
      spec.schemes = {msvs::scheme_from_string(o.scheme)};
    } catch (const Error& e) {
      throw Error(ErrorCode::validation_error, std::string("--scheme: ") + e.what());
    }
  }
  if (o.parallel > 0) spec.parallel = o.parallel;
  if (!o.format.empty()) spec.formats = {harness::format_from_string(o.format)};
  return spec;
}

void print_aggregate(const harness::SweepReport& r) {
  std::printf("%-14s %-10s %5s %12s %12s %10s %10s\n", r.axis.empty() ? "value" : r.axis.c_str(), "scheme", "runs",
              "mean_qoe", "std_qoe", "triggers", "updates");
  for (const auto& a : r.aggregate)
    std::printf("%-14.6g %-10s %5d %12.6f %12.6f %10.2f %10.2f\n", a.value, a.scheme.c_str(), a.runs, a.mean_qoe,
                a.std_qoe, a.mean_triggers, a.mean_updates);
}

void print_pairs(const harness::SweepReport& r) {
  std::map<std::pair<double, std::uint64_t>, std::map<std::string, double>> by;
  for (const auto& x : r.runs)
    if (x.ok) by[{x.value, x.seed}][x.scheme] = x.mean_qoe;
  std::map<std::string, std::pair<int, int>> wins;  // baseline -> (proposed wins, pairs)
  for (const auto& [key, m] : by) {
    const auto p = m.find("proposed");
    if (p == m.end()) continue;
    for (const auto& [scheme, q] : m) {
      if (scheme == "proposed") continue;
      auto& w = wins[scheme];
      w.first += p->second > q ? 1 : 0;
      w.second += 1;
    }
  }
  for (const auto& [scheme, w] : wins)
    std::printf("proposed > %s in %d/%d paired runs\n", scheme.c_str(), w.first, w.second);
}

int execute(harness::ExperimentSpec spec, const std::string& mode) {
  if (mode == "run") {
    spec.sweep.reset();
    spec.seeds.resize(1);
    spec.schemes.resize(1);
  } else if (mode == "compare") {
    spec.sweep.reset();
    if (spec.schemes.size() < 2) spec.schemes = {msvs::Scheme::proposed, msvs::Scheme::fixed_dt, msvs::Scheme::hier_drl};
  }
  const auto total = harness::experiment_cells(spec).size();
  std::fprintf(stderr, "%s: %zu run(s), parallel %d -> %s\n", mode.c_str(), total, spec.parallel, spec.out_dir.c_str());
  const auto report = harness::run_experiment(spec, [](std::size_t done, std::size_t n) {
    std::fprintf(stderr, "\r  %zu/%zu", done, n);
    if (done == n) std::fprintf(stderr, "\n");
  });
  const auto files = harness::export_metrics(report, spec.out_dir, spec.formats);
  print_aggregate(report);
  if (mode == "compare") print_pairs(report);
  for (const auto& f : files) std::fprintf(stderr, "wrote %s\n", f.string().c_str());
  if (!report.all_ok()) {
    for (const auto& r : report.runs)
      if (!r.ok) std::fprintf(stderr, "run failed: value=%g seed=%llu scheme=%s: %s\n", r.value,
                              static_cast<unsigned long long>(r.seed), r.scheme.c_str(), r.error.c_str());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network digital twin simulator for multicast short-video streaming"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool runs) {
    sub->add_option("--config", o.config, "Experiment config file (JSON)");
    if (!runs) return;
    sub->add_option("--out", o.out, "Output directory (default: $NDT_OUT_DIR, then the config's out_dir)");
    sub->add_option("--seeds", o.seeds, "Seed list, e.g. 1,2,5-8");
    sub->add_option("--scheme", o.scheme, "proposed | fixed-dt | hier-drl");
    sub->add_option("--parallel", o.parallel, "Concurrent runs")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "csv | jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  };
  auto* run_cmd = app.add_subcommand("run", "Run one scenario (first seed, first scheme)");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the full sweep grid");
  auto* compare_cmd = app.add_subcommand("compare", "Paired seeds across schemes at the base config");
  auto* validate_cmd = app.add_subcommand("validate-config", "Parse and check a config, print the resolved document");
  add_common(run_cmd, true);
  add_common(sweep_cmd, true);
  add_common(compare_cmd, true);
  add_common(validate_cmd, false);
  validate_cmd->get_option("--config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto spec = load_spec(o);
    if (validate_cmd->parsed()) {
      std::cout << spec.base.dump(2) << "\n";
      std::fprintf(stderr, "config ok\n");
      return 0;
    }
    const std::string mode = run_cmd->parsed() ? "run" : sweep_cmd->parsed() ? "sweep" : "compare";
    return execute(spec, mode);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
