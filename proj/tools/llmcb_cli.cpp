// Command-line front end: run experiments, aggregate seed outputs, validate data files.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>

#include "llmcb/llmcb.hpp"

namespace fs = std::filesystem;
using namespace llmcb;

namespace {

int cmd_run(const fs::path& config_path, std::optional<std::size_t> num_seeds, std::optional<fs::path> out) {
  auto config = harness::load_config(config_path);
  if (num_seeds) {
    config.seeds.clear();
    for (std::size_t s = 0; s < *num_seeds; ++s) config.seeds.push_back(s);
  }
  const fs::path out_dir = out ? *out : config.output_dir.value_or(fs::path("runs"));
  fs::create_directories(out_dir);
  const auto data = harness::prepare_data(config.environment);
  spdlog::info("{} actions, {} records, horizon {}, {} seed(s) -> {}", data->data.actions->size(),
               data->data.records.size(), config.environment.stream.horizon, config.seeds.size(), out_dir.string());

  // Seeds are independent; each owns its orchestrator and writes its own directory.
  std::vector<std::future<harness::RunResult>> futures;
  for (auto seed : config.seeds) {
    const harness::RunOptions opts{false, out_dir / ("seed_" + std::to_string(seed))};
    futures.push_back(std::async(std::launch::async, [&config, data, seed, opts] {
      return harness::run_experiment(config, data, seed, opts);
    }));
  }
  std::vector<std::vector<harness::MetricsRow>> series;
  std::vector<double> rewards, calls;
  int failures = 0;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      auto r = futures[i].get();
      const auto& s = r.metrics.summary;
      std::printf("seed %llu: avg_reward %.5f  llm_calls %lld  call_fraction %.5f  final_p_cb %.4f\n",
                  static_cast<unsigned long long>(config.seeds[i]), s.avg_reward, static_cast<long long>(s.llm_calls),
                  s.call_fraction, s.final_p_cb);
      rewards.push_back(s.avg_reward);
      calls.push_back(static_cast<double>(s.llm_calls));
      series.push_back(std::move(r.metrics.rows));
    } catch (const std::exception& e) {
      spdlog::error("seed {} failed: {}", config.seeds[i], e.what());
      ++failures;
    }
  }
  if (!series.empty()) {
    harness::write_aggregate_csv(out_dir / "aggregate.csv", harness::aggregate_seeds(series));
    const auto r = harness::mean_sem(rewards), c = harness::mean_sem(calls);
    std::printf("mean over %zu seed(s): avg_reward %.5f +- %.5f  llm_calls %.1f +- %.1f\n", series.size(), r.mean,
                r.sem, c.mean, c.sem);
  }
  return failures ? 1 : 0;
}

int cmd_aggregate(const fs::path& in, const fs::path& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(in))
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") files.push_back(entry.path());
  if (files.empty()) throw IoError("no metrics.csv files under " + in.string());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<harness::MetricsRow>> series;
  for (const auto& f : files) series.push_back(harness::read_metrics_csv(f));
  harness::write_aggregate_csv(out, harness::aggregate_seeds(series));
  std::printf("aggregated %zu series -> %s\n", files.size(), out.string().c_str());
  return 0;
}

int cmd_validate(const fs::path& actions, const fs::path& records) {
  const auto data = env::load_dataset(records, actions);
  std::size_t multi = 0;
  for (const auto& r : data.records) multi += r.correct_ids.size() > 1;
  std::printf("ok: %zu actions (dim %ld), %zu records (%zu multi-label)\n", data.actions->size(),
              static_cast<long>(data.actions->dim()), data.records.size(), multi);
  return 0;
}

int cmd_make_synthetic(const fs::path& out, env::SyntheticSpec spec) {
  fs::create_directories(out);
  const auto synth = env::make_synthetic(spec);
  env::write_actions(out / "actions.jsonl", *synth.data.actions);
  env::write_records(out / "records.jsonl", synth.data.records, spec.context_dim);
  std::printf("wrote %zu actions and %zu records to %s\n", synth.data.actions->size(), synth.data.records.size(),
              out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual-bandit model selection between learners and LLM-backed policies"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment config for one or more seeds");
  fs::path config_path;
  std::optional<std::size_t> seeds;
  std::optional<fs::path> out_dir;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seeds", seeds, "Run seeds 0..n-1 instead of the config's list")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* agg = app.add_subcommand("aggregate", "Mean and standard error across per-seed metrics.csv files");
  fs::path agg_in, agg_out;
  agg->add_option("--in", agg_in, "Directory searched recursively for metrics.csv")->required()->check(CLI::ExistingDirectory);
  agg->add_option("--out", agg_out, "Output CSV")->required();

  auto* val = app.add_subcommand("validate-data", "Check an actions/records JSONL pair");
  fs::path val_actions, val_records;
  val->add_option("--actions", val_actions)->required()->check(CLI::ExistingFile);
  val->add_option("--records", val_records)->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("make-synthetic", "Write a synthetic environment as JSONL files");
  fs::path synth_out;
  env::SyntheticSpec spec;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--context-dim", spec.context_dim)->capture_default_str();
  synth->add_option("--action-dim", spec.action_dim)->capture_default_str();
  synth->add_option("--actions", spec.num_actions)->capture_default_str();
  synth->add_option("--records", spec.num_records)->capture_default_str();
  synth->add_option("--seed", spec.hidden_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seeds, out_dir);
    if (*agg) return cmd_aggregate(agg_in, agg_out);
    if (*val) return cmd_validate(val_actions, val_records);
    if (*synth) return cmd_make_synthetic(synth_out, spec);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
