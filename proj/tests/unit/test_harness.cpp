#include <gtest/gtest.h>

#include <clocale>
#include <filesystem>
#include <fstream>

#include "llmcb/harness/config.hpp"
#include "llmcb/harness/metrics.hpp"
#include "llmcb/harness/runner.hpp"

using namespace llmcb;
using namespace llmcb::harness;
using nlohmann::json;

namespace {

json base_config(std::size_t horizon = 640) {
  return json::parse(R"({
    "schema": "v1",
    "environment": {"source": "synthetic", "context_dim": 8, "action_dim": 8, "num_actions": 20,
                    "hidden_seed": 3, "horizon": 640, "batch_size": 32},
    "policies": [
      {"type": "spanner-greedy", "name": "cb", "step_rule": "adagrad", "intercept": true},
      {"type": "llm", "name": "oracle", "backend": {"type": "synthetic", "accuracy": 0.35}}
    ],
    "strategy": {"type": "corral"},
    "smoothing": {"type": "clip", "p_min": 0.2},
    "log_every": 1
  })")
      .patch(json::array({{{"op", "replace"}, {"path", "/environment/horizon"}, {"value", horizon}}}));
}

RunResult run(const json& j, std::uint64_t seed = 0, RunOptions opts = {}) {
  const auto cfg = parse_config(j);
  return run_experiment(cfg, prepare_data(cfg.environment), seed, opts);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "llmcb_test_harness" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = base_config();
  EXPECT_NO_THROW(parse_config(j));
  j["strategy"]["etta"] = 0.1;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = base_config();
  j["extra"] = 1;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = base_config();
  j["schema"] = "v2";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = base_config();
  j["smoothing"]["p_min"] = 0.7;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = base_config();
  j["policies"][1]["backend"]["accuracy"] = 1.5;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = base_config();
  j["environment"].erase("horizon");
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ResolvesPathsAgainstTheConfigFile) {
  auto j = json::parse(R"({"schema":"v1","environment":{"source":"jsonl","actions":"a.jsonl","records":"/abs/r.jsonl","horizon":1},
                           "policies":[{"type":"constant","action":0}],"output_dir":"out"})");
  const auto cfg = parse_config(j, "/base/dir");
  const auto& src = std::get<JsonlSource>(cfg.environment.source);
  EXPECT_EQ(src.actions, std::filesystem::path("/base/dir/a.jsonl"));
  EXPECT_EQ(src.records, std::filesystem::path("/abs/r.jsonl"));
  EXPECT_EQ(*cfg.output_dir, std::filesystem::path("/base/dir/out"));
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(LLMCB_CONFIG_DIR))
    if (entry.path().extension() == ".json") EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
}

TEST(Metrics, CsvRoundTripIsExact) {
  Rng rng(4);
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i <= 1000; ++i) {
    MetricsRow r{i, uniform01(rng), uniform01(rng) * 1e-7, static_cast<std::int64_t>(i / 3), std::nullopt, std::nullopt};
    if (i % 2) r.cf_cb_reward = uniform01(rng);
    if (i % 3) r.cf_shadow_reward = 1.0 / 3.0;
    rows.push_back(r);
  }
  const auto dir = temp_dir("csv");
  write_metrics_csv(dir / "m.csv", rows);
  EXPECT_EQ(read_metrics_csv(dir / "m.csv"), rows);

  write_metrics_csv(dir / "empty.csv", {});
  std::ifstream in(dir / "empty.csv");
  std::string header, extra;
  std::getline(in, header);
  EXPECT_EQ(header, kCsvHeader);
  EXPECT_FALSE(std::getline(in, extra));
}

TEST(Metrics, DecimalPointIgnoresLocale) {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
  EXPECT_EQ(format_double(0.25), "0.25");
  EXPECT_EQ(parse_double("0.25", "x"), 0.25);
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(Aggregate, MeanAndStandardError) {
  auto series = [](double v) { return std::vector<MetricsRow>{{1, v, 1.0, 0, v, std::nullopt}}; };
  const auto agg = aggregate_seeds({series(0.1), series(0.2), series(0.3)});
  EXPECT_NEAR(agg[0].avg_reward.mean, 0.2, 1e-15);
  EXPECT_NEAR(agg[0].avg_reward.sem, 0.1 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(agg[0].avg_reward.sem, 0.05774, 1e-5);
  EXPECT_TRUE(agg[0].cf_cb_reward);
  EXPECT_FALSE(agg[0].cf_shadow_reward);
  EXPECT_EQ(aggregate_seeds({series(0.4)})[0].avg_reward.sem, 0.0);
  EXPECT_EQ(aggregate_seeds({series(0.4), series(0.4)})[0].avg_reward.sem, 0.0);
  EXPECT_THROW(aggregate_seeds({series(0.1), {}}), DataError);
}

TEST(Runner, HorizonZeroGivesEmptySeries) {
  const auto r = run(base_config(0));
  EXPECT_TRUE(r.metrics.rows.empty());
  EXPECT_EQ(r.metrics.summary.steps, 0u);
  EXPECT_EQ(r.metrics.summary.avg_reward, 0.0);
  EXPECT_EQ(r.metrics.summary.llm_calls, 0);
}

TEST(Runner, AccountingIdentities) {
  const auto r = run(base_config(), 7);
  ASSERT_EQ(r.records.size(), 640u);
  ASSERT_EQ(r.metrics.rows.size(), 640u);
  double reward = 0.0;
  std::int64_t llm_steps = 0;
  for (std::size_t t = 0; t < r.records.size(); ++t) {
    const auto& rec = r.records[t];
    reward += loss_to_reward(rec.loss);
    llm_steps += rec.dist_snapshot.group(rec.policy_index) == PolicyGroup::LLM;
    EXPECT_EQ(rec.t, t + 1);
    EXPECT_NEAR(r.metrics.rows[t].avg_reward, reward / double(t + 1), 1e-9);
    EXPECT_EQ(r.metrics.rows[t].llm_calls_cum, llm_steps);
    if (t > 0) EXPECT_GE(r.metrics.rows[t].llm_calls_cum, r.metrics.rows[t - 1].llm_calls_cum);
  }
  const auto& s = r.metrics.summary;
  EXPECT_EQ(s.llm_calls, llm_steps);
  EXPECT_DOUBLE_EQ(s.call_fraction, double(llm_steps) / 640.0);
  EXPECT_NEAR(s.regret, 640.0 - reward, 1e-9);
  EXPECT_EQ(s.per_policy[0].sampled + s.per_policy[1].sampled, 640);
}

TEST(Runner, StrideKeepsFinalRow) {
  auto j = base_config(650);
  j["log_every"] = 64;
  const auto r = run(j);
  ASSERT_EQ(r.metrics.rows.size(), 11u);
  EXPECT_EQ(r.metrics.rows.back().step, 650u);
  EXPECT_EQ(r.metrics.rows[0].step, 64u);
}

TEST(Runner, DeterministicAndCounterfactualsAreNonInvasive) {
  auto j = base_config();
  const auto a = run(j, 3), b = run(j, 3);
  j["counterfactual"] = {{"shadow", false}, {"llm", true}};
  const auto c = run(j, 3);
  ASSERT_EQ(a.records.size(), c.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].action_id, b.records[i].action_id);
    EXPECT_EQ(a.records[i].policy_index, c.records[i].policy_index);
    EXPECT_EQ(a.records[i].action_id, c.records[i].action_id);
    EXPECT_TRUE(c.records[i].cf_llm_reward);
  }
  EXPECT_FALSE(c.metrics.rows.back().cf_shadow_reward);
  const auto other = run(base_config(), 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) differs |= a.records[i].context_id != other.records[i].context_id;
  EXPECT_TRUE(differs);
}

TEST(Runner, CbOnlyRosterMatchesForcedZeroLlmProbability) {
  auto solo = base_config();
  solo["policies"].erase(1);
  auto forced = base_config();
  forced["strategy"] = {{"type", "constant"}, {"p_llm", 0.0}};
  const auto a = run(solo, 2), b = run(forced, 2);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].action_id, b.records[i].action_id);
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
  }
  EXPECT_EQ(b.metrics.summary.llm_calls, 0);
  EXPECT_EQ(a.metrics.rows.back().cf_cb_reward, b.metrics.rows.back().cf_cb_reward);
}

TEST(Runner, ShadowWithoutLlmStepsStaysUntrained) {
  auto j = base_config();
  j["strategy"] = {{"type", "constant"}, {"p_llm", 0.0}};
  const auto r = run(j, 1);
  // An untrained model scores every action 0, so it always plays action 0.
  const auto cfg = parse_config(j);
  const auto data = prepare_data(cfg.environment);
  double hits = 0.0;
  for (const auto& rec : r.records) hits += data->data.records[data->index_by_id.at(rec.context_id)].correct_ids[0] == 0;
  EXPECT_NEAR(*r.metrics.rows.back().cf_shadow_reward, hits / double(r.records.size()), 1e-12);
}

TEST(Runner, ShadowEqualsMainModelWhenEveryStepIsLlm) {
  auto j = base_config();
  j["strategy"] = {{"type", "constant"}, {"p_llm", 1.0}};
  j["smoothing"] = {{"type", "none"}};
  const auto r = run(j, 1);
  for (const auto& row : r.metrics.rows) EXPECT_EQ(row.cf_cb_reward, row.cf_shadow_reward);
  EXPECT_EQ(r.metrics.summary.llm_calls, 640);
}

TEST(Runner, TwoPerfectArmsGetFullReward) {
  auto j = base_config();
  j["policies"] = json::parse(R"([
    {"type": "llm", "name": "a", "backend": {"type": "synthetic", "accuracy": 1.0}},
    {"type": "llm", "name": "b", "backend": {"type": "synthetic", "accuracy": 1.0}}])");
  const auto combined = run(j, 0);
  auto solo = j;
  solo["policies"].erase(1);
  EXPECT_GE(combined.metrics.summary.avg_reward, run(solo, 0).metrics.summary.avg_reward);
  EXPECT_EQ(combined.metrics.summary.avg_reward, 1.0);
}

TEST(Runner, WritesOutputsAndFlushesPartialMetricsOnError) {
  const auto dir = temp_dir("run");
  auto ok = run(base_config(), 0, {true, dir / "ok"});
  EXPECT_EQ(read_metrics_csv(dir / "ok" / "metrics.csv").size(), 640u);
  EXPECT_TRUE(std::filesystem::exists(dir / "ok" / "summary.json"));
  std::ifstream inter(dir / "ok" / "interactions.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(inter, l);) ++lines;
  EXPECT_EQ(lines, 640u);

  // A replay backend over an empty cache with no CB fallback fails on the first LLM step.
  std::ofstream(dir / "empty_cache.jsonl").close();
  auto j = base_config();
  j["policies"] = json::array({{{"type", "llm"}, {"name", "r"},
                                {"backend", {{"type", "replay"}, {"cache", (dir / "empty_cache.jsonl").string()},
                                             {"recorded_id", "x"}}}}});
  EXPECT_THROW(run(j, 0, {true, dir / "fail"}), GeneratorError);
  EXPECT_TRUE(std::filesystem::exists(dir / "fail" / "metrics.csv"));
}

TEST(Runner, GeneratorFailureWithCbFallbackKeepsRunning) {
  const auto dir = temp_dir("fallback");
  std::ofstream(dir / "empty_cache.jsonl").close();
  auto j = base_config();
  j["policies"][1] = {{"type", "llm"}, {"name", "r"},
                      {"backend", {{"type", "replay"}, {"cache", (dir / "empty_cache.jsonl").string()}, {"recorded_id", "x"}}}};
  const auto r = run(j, 0);
  std::int64_t fallbacks = 0;
  for (const auto& rec : r.records) {
    fallbacks += rec.fallback;
    if (rec.fallback) EXPECT_EQ(rec.policy_index, 0u);
  }
  EXPECT_GT(fallbacks, 0);
  EXPECT_EQ(r.metrics.summary.llm_calls, fallbacks);
}

TEST(Runner, JsonlEnvironment) {
  const auto dir = temp_dir("jsonl");
  env::SyntheticSpec spec;
  spec.num_records = 300;
  spec.context_dim = 6;
  spec.action_dim = 4;
  spec.num_actions = 10;
  const auto synth = env::make_synthetic(spec);
  env::write_actions(dir / "a.jsonl", *synth.data.actions);
  env::write_records(dir / "r.jsonl", synth.data.records, 6);
  auto j = base_config(300);
  j["environment"] = {{"source", "jsonl"}, {"actions", "a.jsonl"}, {"records", "r.jsonl"}, {"horizon", 300}};
  const auto cfg = parse_config(j, dir);
  const auto r = run_experiment(cfg, prepare_data(cfg.environment), 0);
  EXPECT_EQ(r.records.size(), 300u);
}

TEST(Runner, CbProbabilityEndsAboveNinetyPercent) {
  const auto cfg = load_config(std::filesystem::path(LLMCB_CONFIG_DIR) / "best_of_both.json");
  const auto r = run_experiment(cfg, prepare_data(cfg.environment), 0, {false, std::nullopt});
  // Clip keeps the CB group at >= 0.2 throughout; CORRAL moves the rest to CB once it wins.
  for (const auto& row : r.metrics.rows) EXPECT_GE(row.p_cb, 0.2 - 1e-12);
  EXPECT_GT(r.metrics.summary.final_p_cb, 0.9);
  EXPECT_EQ(r.metrics.rows.back().step, cfg.environment.stream.horizon);
}
