#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "llmcb/core/types.hpp"

namespace llmcb::harness {

struct MetricsRow {
  std::size_t step = 0;
  double avg_reward = 0.0;
  double p_cb = 0.0;
  std::int64_t llm_calls_cum = 0;
  std::optional<double> cf_cb_reward;
  std::optional<double> cf_shadow_reward;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct PolicyCalls {
  std::string name;
  std::string group;
  std::int64_t sampled = 0;
};

struct Summary {
  std::size_t steps = 0;
  double avg_reward = 0.0;
  std::int64_t llm_calls = 0;
  double call_fraction = 0.0;
  /// Cumulative loss; equals regret because the optimal policy has zero loss here.
  double regret = 0.0;
  double final_p_cb = 0.0;
  std::optional<double> cf_cb_reward;
  std::optional<double> cf_shadow_reward;
  std::vector<PolicyCalls> per_policy;
};

/// Rows at every `log_every`-th step plus the last step; the cf_* columns are
/// running averages of the counterfactual rewards.
struct MetricsSeries {
  std::vector<MetricsRow> rows;
  Summary summary;
};

inline constexpr const char* kCsvHeader = "step,avg_reward,p_cb,llm_calls_cum,cf_cb_reward,cf_shadow_reward";

/// Shortest representation that parses back to the same double; never
/// locale-dependent.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw DataError(where + ": not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows)
    out << r.step << ',' << format_double(r.avg_reward) << ',' << format_double(r.p_cb) << ',' << r.llm_calls_cum
        << ',' << opt(r.cf_cb_reward) << ',' << opt(r.cf_shadow_reward) << '\n';
  if (!out) throw IoError("write failed on " + path.string());
}

inline std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError(path.string() + ": unexpected CSV header");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto at = path.string() + ":" + std::to_string(lineno);
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw DataError(at + ": expected 6 columns");
    MetricsRow r;
    r.step = static_cast<std::size_t>(parse_double(cells[0], at));
    r.avg_reward = parse_double(cells[1], at);
    r.p_cb = parse_double(cells[2], at);
    r.llm_calls_cum = static_cast<std::int64_t>(parse_double(cells[3], at));
    if (!cells[4].empty()) r.cf_cb_reward = parse_double(cells[4], at);
    if (!cells[5].empty()) r.cf_shadow_reward = parse_double(cells[5], at);
    rows.push_back(r);
  }
  return rows;
}

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

/// Mean and standard error (sample std / sqrt(n)); sem is 0 for one value.
inline MeanSem mean_sem(const std::vector<double>& xs) {
  if (xs.empty()) throw ConfigError("mean_sem: no values");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

struct AggregateRow {
  std::size_t step = 0;
  MeanSem avg_reward, p_cb, llm_calls_cum;
  std::optional<MeanSem> cf_cb_reward, cf_shadow_reward;
};

inline std::vector<AggregateRow> aggregate_seeds(const std::vector<std::vector<MetricsRow>>& runs) {
  if (runs.empty()) throw ConfigError("aggregate_seeds: no series");
  const auto len = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != len)
      throw DataError("aggregate_seeds: series lengths differ (" + std::to_string(len) + " vs " +
                      std::to_string(r.size()) + ")");
  std::vector<AggregateRow> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> reward, pcb, calls, cf, sh;
    for (const auto& run : runs) {
      const auto& row = run[i];
      if (row.step != runs.front()[i].step) throw DataError("aggregate_seeds: step columns differ at row " + std::to_string(i));
      reward.push_back(row.avg_reward);
      pcb.push_back(row.p_cb);
      calls.push_back(static_cast<double>(row.llm_calls_cum));
      if (row.cf_cb_reward) cf.push_back(*row.cf_cb_reward);
      if (row.cf_shadow_reward) sh.push_back(*row.cf_shadow_reward);
    }
    auto& a = out[i];
    a.step = runs.front()[i].step;
    a.avg_reward = mean_sem(reward);
    a.p_cb = mean_sem(pcb);
    a.llm_calls_cum = mean_sem(calls);
    if (cf.size() == runs.size()) a.cf_cb_reward = mean_sem(cf);
    if (sh.size() == runs.size()) a.cf_shadow_reward = mean_sem(sh);
  }
  return out;
}

inline void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step";
  for (const char* c : {"avg_reward", "p_cb", "llm_calls_cum", "cf_cb_reward", "cf_shadow_reward"})
    out << ',' << c << "_mean," << c << "_sem";
  out << '\n';
  auto put = [&](const std::optional<MeanSem>& m) {
    if (m) out << ',' << format_double(m->mean) << ',' << format_double(m->sem);
    else out << ",,";
  };
  for (const auto& r : rows) {
    out << r.step;
    put(r.avg_reward);
    put(r.p_cb);
    put(r.llm_calls_cum);
    put(r.cf_cb_reward);
    put(r.cf_shadow_reward);
    out << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace llmcb::harness
