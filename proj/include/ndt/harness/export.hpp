#pragma once

// Long-format tables for plotting: runs, aggregate, slots and events, each as
// CSV (header row) and/or JSON lines. Reals are printed with 17 significant
// digits.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "ndt/harness/config.hpp"
#include "ndt/harness/experiment.hpp"

namespace ndt::harness {

using Field = std::variant<double, std::int64_t, std::uint64_t, bool, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Field>> rows;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_field(const Field& f) {
  if (const auto* d = std::get_if<double>(&f)) return format_real(*d);
  if (const auto* i = std::get_if<std::int64_t>(&f)) return std::to_string(*i);
  if (const auto* u = std::get_if<std::uint64_t>(&f)) return std::to_string(*u);
  if (const auto* b = std::get_if<bool>(&f)) return *b ? "true" : "false";
  const auto& s = std::get<std::string>(f);
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string json_field(const Field& f) {
  if (const auto* d = std::get_if<double>(&f)) return std::isfinite(*d) ? format_real(*d) : "null";
  if (const auto* s = std::get_if<std::string>(&f)) return nlohmann::json(*s).dump();
  return csv_field(f);
}

inline std::int64_t i64(int v) { return v; }

}  // namespace detail

inline Table runs_table(const SweepReport& r) {
  Table t{"runs", {"value", "seed", "scheme", "mean_qoe", "triggers", "updates", "ok", "error"}, {}};
  for (const auto& x : r.runs)
    t.rows.push_back({x.value, x.seed, x.scheme, x.mean_qoe, detail::i64(x.triggers), detail::i64(x.updates), x.ok, x.error});
  return t;
}

inline Table aggregate_table(const SweepReport& r) {
  Table t{"aggregate", {"value", "scheme", "runs", "mean_qoe", "std_qoe", "mean_triggers", "mean_updates"}, {}};
  for (const auto& a : r.aggregate)
    t.rows.push_back({a.value, a.scheme, detail::i64(a.runs), a.mean_qoe, a.std_qoe, a.mean_triggers, a.mean_updates});
  return t;
}

inline Table slots_table(const SweepReport& r) {
  Table t{"slots",
          {"value", "seed", "scheme", "slot", "mean_qoe", "mean_utility", "mean_bitrate_bps", "mean_rebuffer_s",
           "mean_switch", "mean_waste_s", "labeled_error", "unlabeled_error", "collections", "triggers", "updates",
           "groups", "msvs_share", "split_eta", "transcode_cost"},
          {}};
  for (const auto& s : r.slots) {
    const auto& m = s.metrics;
    t.rows.push_back({s.value, s.seed, s.scheme, detail::i64(m.slot), m.mean_qoe, m.mean_utility, m.mean_bitrate_bps,
                      m.mean_rebuffer_s, m.mean_switch, m.mean_waste_s, m.labeled_error, m.unlabeled_error,
                      detail::i64(m.collections), detail::i64(m.triggers), detail::i64(m.updates),
                      detail::i64(m.groups), m.msvs_share, m.split_eta, m.transcode_cost});
  }
  return t;
}

inline Table events_table(const SweepReport& r) {
  Table t{"events", {"value", "seed", "scheme", "slot", "phase", "kind", "subject", "event_value", "detail"}, {}};
  for (const auto& e : r.events)
    t.rows.push_back({e.value, e.seed, e.scheme, detail::i64(e.event.slot), std::string(sim::to_string(e.event.phase)),
                      e.event.kind, detail::i64(e.event.subject), e.event.value, e.event.detail});
  return t;
}

inline Table errors_table(const SweepReport& r) {
  Table t{"errors", {"value", "seed", "scheme", "error"}, {}};
  for (const auto& x : r.runs)
    if (!x.ok) t.rows.push_back({x.value, x.seed, x.scheme, x.error});
  return t;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_field(row[i]);
    out += '\n';
  }
  return out;
}

inline std::string to_jsonl(const Table& t) {
  std::string out;
  for (const auto& row : t.rows) {
    out += '{';
    for (std::size_t i = 0; i < row.size(); ++i)
      out += (i ? "," : "") + nlohmann::json(t.columns[i]).dump() + ":" + detail::json_field(row[i]);
    out += "}\n";
  }
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write '" + p.string() + "'");
  out << text;
  out.close();
  require(!out.fail(), ErrorCode::io_error, "failed writing '" + p.string() + "'");
}

/// Writes every table in every format under `dir` and returns the paths.
/// An errors.csv manifest is added when some run failed.
inline std::vector<std::filesystem::path> export_metrics(const SweepReport& r, const std::filesystem::path& dir,
                                                         const std::vector<Format>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorCode::io_error, "cannot create output directory '" + dir.string() + "'");
  std::vector<std::filesystem::path> written;
  for (const auto& t : {runs_table(r), aggregate_table(r), slots_table(r), events_table(r)}) {
    for (Format f : formats) {
      const auto p = dir / (t.name + "." + to_string(f));
      write_file(p, f == Format::csv ? to_csv(t) : to_jsonl(t));
      written.push_back(p);
    }
  }
  if (!r.all_ok()) {
    const auto p = dir / "errors.csv";
    write_file(p, to_csv(errors_table(r)));
    written.push_back(p);
  }
  return written;
}

}  // namespace ndt::harness
