#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ndt/harness/config.hpp"
#include "ndt/harness/experiment.hpp"
#include "ndt/harness/export.hpp"

using namespace ndt;
using namespace ndt::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ndt_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<ErrorCode, std::string> failure(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  return {ErrorCode::invalid_argument, "no error"};
}

// Minimal CSV reader: quoted fields with doubled quotes, no embedded newlines.
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    row.push_back(cur);
    rows.push_back(row);
  }
  return rows;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kSmall = R"({
  "sim": {"horizon": 15},
  "scenario": {"users": 20, "drift": [{"slot": 8}]},
  "experiment": {
    "sweep": {"path": "scenario.bandwidth_hz", "values": [1.0e6, 2.2e6]},
    "seeds": [1, 2],
    "schemes": ["proposed", "hier-drl"],
    "formats": ["csv", "jsonl"]
  }
})";

}  // namespace

// --- parsing -------------------------------------------------------------------

TEST(Config, MinimalFileFillsDefaults) {
  const auto spec = parse_config_text("{}");
  EXPECT_EQ(spec.sim.horizon, 200);
  EXPECT_EQ(spec.scenario.users, 100);
  EXPECT_DOUBLE_EQ(spec.scenario.bandwidth_hz, 2.2e6);
  EXPECT_EQ(spec.scenario.drift.size(), 2u);
  EXPECT_EQ(spec.seeds, std::vector<std::uint64_t>{1});
  EXPECT_FALSE(spec.sweep.has_value());
  EXPECT_EQ(spec.base.at("scenario").at("qoe").at("beta"), 2.0);
}

TEST(Config, ValuesOverrideDefaults) {
  const auto spec = parse_config_text(kSmall);
  EXPECT_EQ(spec.sim.horizon, 15);
  EXPECT_EQ(spec.scenario.users, 20);
  ASSERT_EQ(spec.scenario.drift.size(), 1u);
  EXPECT_EQ(spec.scenario.drift[0].slot, 8);
  EXPECT_DOUBLE_EQ(spec.scenario.drift[0].fraction, 0.6);
  ASSERT_TRUE(spec.sweep.has_value());
  EXPECT_EQ(spec.sweep->values.size(), 2u);
  EXPECT_EQ(spec.schemes.size(), 2u);
}

TEST(Config, UnknownKeyIsRejectedWithItsPath) {
  const auto [code, msg] = failure(R"({"scenario": {"qoe": {"alpah": 1}}})");
  EXPECT_EQ(code, ErrorCode::validation_error);
  EXPECT_NE(msg.find("scenario.qoe.alpah"), std::string::npos) << msg;
  const auto [code2, msg2] = failure(R"({"scenario": {"drift": [{"slot": 3, "strength": 1}]}})");
  EXPECT_EQ(code2, ErrorCode::validation_error);
  EXPECT_NE(msg2.find("scenario.drift[0].strength"), std::string::npos) << msg2;
}

TEST(Config, NegativeBandwidthNamesTheKey) {
  const auto [code, msg] = failure(R"({"scenario": {"bandwidth_hz": -1.0}})");
  EXPECT_EQ(code, ErrorCode::validation_error);
  EXPECT_NE(msg.find("bandwidth_hz"), std::string::npos) << msg;
}

TEST(Config, DuplicateSeedsAreRejected) {
  const auto [code, msg] = failure(R"({"experiment": {"seeds": [1, 2, 1]}})");
  EXPECT_EQ(code, ErrorCode::validation_error);
  EXPECT_NE(msg.find("seeds"), std::string::npos);
}

TEST(Config, WrongTypeIsValidationError) {
  EXPECT_EQ(failure(R"({"scenario": {"users": "many"}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"scenario": {"users": 10.5}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"scenario": {"scheme": "greedy"}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"experiment": {"schemes": ["greedy"]}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"scenario": {"drift": [{"remap": "flip"}]}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"experiment": {"seeds": [-1]}})").first, ErrorCode::validation_error);
}

TEST(Config, BadSweepIsRejected) {
  EXPECT_EQ(failure(R"({"experiment": {"sweep": {"path": "scenario.nope", "values": [1]}}})").first,
            ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"experiment": {"sweep": {"values": []}}})").first, ErrorCode::validation_error);
  EXPECT_EQ(failure(R"({"experiment": {"sweep": {"values": [1e6, -1e6]}}})").first, ErrorCode::validation_error);
}

TEST(Config, MalformedTextIsParseError) {
  EXPECT_EQ(failure("{\"sim\": ").first, ErrorCode::parse_error);
}

TEST(Config, MissingFileIsIoError) {
  try {
    parse_config("/nonexistent/ndt.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io_error);
  }
}

TEST(Config, SampleConfigsParse) {
  for (const auto& entry : fs::directory_iterator(NDT_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(parse_config(entry.path().string())) << entry.path();
  }
}

// --- experiments -----------------------------------------------------------------

TEST(Experiment, BandwidthSweepHasOneCellPerValueSeedScheme) {
  auto spec = parse_config_text(R"({"experiment": {
    "sweep": {"path": "scenario.bandwidth_hz", "values": [1.0e6, 1.4e6, 1.8e6, 2.2e6]},
    "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    "schemes": ["proposed", "fixed-dt", "hier-drl"]}})");
  const auto cells = experiment_cells(spec);
  ASSERT_EQ(cells.size(), 120u);
  std::set<std::tuple<double, std::uint64_t, std::string>> uniq;
  for (const auto& c : cells) uniq.insert({c.value, c.seed, msvs::to_string(c.scheme)});
  EXPECT_EQ(uniq.size(), 120u);
}

TEST(Experiment, SingleValueSingleSeedReducesToOneRun) {
  auto spec = parse_config_text(R"({"sim": {"horizon": 12}, "scenario": {"users": 15}})");
  const auto r = run_experiment(spec);
  ASSERT_EQ(r.runs.size(), 1u);
  ASSERT_EQ(r.aggregate.size(), 1u);
  EXPECT_EQ(r.slots.size(), 12u);
  EXPECT_EQ(r.aggregate[0].mean_qoe, r.runs[0].mean_qoe);
  EXPECT_EQ(r.aggregate[0].std_qoe, 0.0);
  double q = 0.0;
  for (const auto& s : r.slots) q += s.metrics.mean_qoe;
  EXPECT_NEAR(q / 12.0, r.runs[0].mean_qoe, 1e-12);
}

TEST(Experiment, FailedRunIsRecordedAndOthersContinue) {
  auto spec = parse_config_text(R"({"sim": {"horizon": 5}, "scenario": {"users": 10}})");
  spec.sweep = SweepAxis{"scenario.users", {10, -3}};
  const auto r = run_experiment(spec);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_FALSE(r.all_ok());
  EXPECT_FALSE(r.runs[0].ok);
  EXPECT_NE(r.runs[0].error.find("users"), std::string::npos);
  EXPECT_TRUE(r.runs[1].ok);
  const auto dir = scratch_dir("failed");
  export_metrics(r, dir, {Format::csv});
  const auto errors = read_csv(slurp(dir / "errors.csv"));
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[1][0], "-3");
}

// --- export -------------------------------------------------------------------

TEST(Export, EmptyReportGivesHeaderOnlyCsv) {
  const auto dir = scratch_dir("empty");
  export_metrics(SweepReport{}, dir, {Format::csv, Format::jsonl});
  for (const char* t : {"runs", "aggregate", "slots", "events"}) {
    const auto csv = slurp(dir / (std::string(t) + ".csv"));
    EXPECT_EQ(line_count(csv), 1u) << t;
    EXPECT_EQ(csv.substr(0, 6), std::string("value,"));
    EXPECT_EQ(slurp(dir / (std::string(t) + ".jsonl")), "");
  }
}

TEST(Export, CsvRoundTripsAndJsonLinesCountRows) {
  const auto spec = parse_config_text(kSmall);
  const auto r = run_experiment(spec);
  ASSERT_TRUE(r.all_ok());
  const auto dir = scratch_dir("roundtrip");
  const auto files = export_metrics(r, dir, spec.formats);

  std::set<fs::path> listed;
  for (const auto& e : fs::recursive_directory_iterator(dir)) listed.insert(e.path());
  EXPECT_EQ(listed, std::set<fs::path>(files.begin(), files.end()));
  EXPECT_EQ(files.size(), 8u);

  const auto runs = read_csv(slurp(dir / "runs.csv"));
  ASSERT_EQ(runs.size(), r.runs.size() + 1);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& row = runs[i + 1];
    EXPECT_EQ(std::strtod(row[0].c_str(), nullptr), r.runs[i].value);
    EXPECT_EQ(std::stoull(row[1]), r.runs[i].seed);
    EXPECT_EQ(row[2], r.runs[i].scheme);
    EXPECT_EQ(std::strtod(row[3].c_str(), nullptr), r.runs[i].mean_qoe);
    EXPECT_EQ(std::stoi(row[4]), r.runs[i].triggers);
    EXPECT_EQ(std::stoi(row[5]), r.runs[i].updates);
  }
  const auto slots = read_csv(slurp(dir / "slots.csv"));
  ASSERT_EQ(slots.size(), r.slots.size() + 1);
  for (std::size_t i = 0; i < r.slots.size(); ++i) {
    const auto& m = r.slots[i].metrics;
    const auto& row = slots[i + 1];
    EXPECT_EQ(std::stoi(row[3]), m.slot);
    EXPECT_EQ(std::strtod(row[4].c_str(), nullptr), m.mean_qoe);
    EXPECT_EQ(std::strtod(row[10].c_str(), nullptr), m.labeled_error);
    EXPECT_EQ(std::strtod(row[18].c_str(), nullptr), m.transcode_cost);
  }
  EXPECT_EQ(line_count(slurp(dir / "runs.jsonl")), r.runs.size());
  EXPECT_EQ(line_count(slurp(dir / "slots.jsonl")), r.slots.size());
  EXPECT_EQ(line_count(slurp(dir / "aggregate.jsonl")), r.aggregate.size());
  EXPECT_EQ(line_count(slurp(dir / "events.jsonl")), r.events.size());
  std::stringstream jl(slurp(dir / "runs.jsonl"));
  std::string line;
  for (std::size_t i = 0; std::getline(jl, line); ++i) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("mean_qoe").get<double>(), r.runs[i].mean_qoe);
  }

  // Aggregates recomputed from the exported per-run rows.
  std::map<std::pair<std::string, std::string>, std::vector<double>> by;
  for (std::size_t i = 1; i < runs.size(); ++i) by[{runs[i][0], runs[i][2]}].push_back(std::strtod(runs[i][3].c_str(), nullptr));
  const auto agg = read_csv(slurp(dir / "aggregate.csv"));
  ASSERT_EQ(agg.size(), by.size() + 1);
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto& v = by.at({agg[i][0], agg[i][1]});
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    EXPECT_NEAR(std::strtod(agg[i][3].c_str(), nullptr), m, 1e-12);
    EXPECT_NEAR(std::strtod(agg[i][4].c_str(), nullptr), sd, 1e-12);
  }
}

TEST(Export, RerunAndParallelRunGiveIdenticalFiles) {
  auto spec = parse_config_text(kSmall);
  const auto a = scratch_dir("det_a");
  const auto b = scratch_dir("det_b");
  const auto c = scratch_dir("det_c");
  export_metrics(run_experiment(spec), a, spec.formats);
  export_metrics(run_experiment(spec), b, spec.formats);
  spec.parallel = 3;
  export_metrics(run_experiment(spec), c, spec.formats);
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(e.path()), slurp(b / name)) << name;
    EXPECT_EQ(slurp(e.path()), slurp(c / name)) << name;
  }
}

TEST(Export, CsvQuotesFieldsWithCommas) {
  Table t{"t", {"a", "b"}, {{std::string("x,y"), std::string("say \"hi\"")}}};
  EXPECT_EQ(to_csv(t), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
}
