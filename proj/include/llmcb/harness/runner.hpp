#pragma once

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "llmcb/bandit/spanner_greedy.hpp"
#include "llmcb/env/batches.hpp"
#include "llmcb/env/dataset.hpp"
#include "llmcb/env/synthetic.hpp"
#include "llmcb/harness/config.hpp"
#include "llmcb/harness/metrics.hpp"
#include "llmcb/llm/cache.hpp"
#include "llmcb/llm/http_backend.hpp"
#include "llmcb/llm/llm_policy.hpp"
#include "llmcb/llm/synthetic_backend.hpp"
#include "llmcb/selector/orchestrator.hpp"

namespace llmcb::harness {

/// Environment data shared read-only by every seed of an experiment.
struct PreparedData {
  env::Dataset data;
  std::unordered_map<int, std::size_t> index_by_id;
  Eigen::Index context_dim = 1;

  const env::DatasetRecord& record_for(const Context& c) const {
    auto it = index_by_id.find(c.id);
    if (it == index_by_id.end()) throw DataError("unknown context id " + std::to_string(c.id));
    return data.records[it->second];
  }
};

inline std::shared_ptr<const PreparedData> prepare_data(const EnvironmentConfig& config) {
  auto out = std::make_shared<PreparedData>();
  if (const auto* s = std::get_if<env::SyntheticSpec>(&config.source)) {
    out->data = env::make_synthetic(*s).data;
    out->context_dim = s->context_dim;
  } else {
    const auto& j = std::get<JsonlSource>(config.source);
    out->data = env::load_dataset(j.records, j.actions);
    if (!out->data.records.empty()) out->context_dim = out->data.records.front().context.embedding.size();
  }
  for (std::size_t i = 0; i < out->data.records.size(); ++i)
    out->index_by_id.emplace(out->data.records[i].context.id, i);
  return out;
}

/// One cache object per file per process, so concurrent seeds append through
/// a single writer.
inline std::shared_ptr<llm::ResponseCache> shared_cache(const std::filesystem::path& path) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<llm::ResponseCache>> caches;
  std::lock_guard lock(mutex);
  const auto key = std::filesystem::absolute(path).lexically_normal().string();
  auto& slot = caches[key];
  if (!slot) slot = std::make_shared<llm::ResponseCache>(path);
  return slot;
}

inline std::shared_ptr<llm::GeneratorBackend> make_backend(const LlmPolicyConfig& config,
                                                           std::shared_ptr<const PreparedData> data,
                                                           const RngStreams& streams) {
  if (const auto* s = std::get_if<SyntheticBackendConfig>(&config.backend)) {
    auto oracle = s->oracle;
    if (!s->seed_given) oracle.seed = streams.seed_for("backend/" + config.options.name);
    auto key = [data](const Context& c) { return data->record_for(c).correct_ids; };
    return std::make_shared<llm::SyntheticOracleBackend>(data->data.actions, key, oracle);
  }
  if (const auto* r = std::get_if<ReplayBackendConfig>(&config.backend))
    return std::make_shared<llm::ReplayBackend>(shared_cache(r->cache), r->recorded_id);
  const auto& c = std::get<ChatBackendConfig>(config.backend);
  std::shared_ptr<llm::GeneratorBackend> backend = std::make_shared<llm::ChatCompletionsBackend>(c.options);
  if (c.cache) backend = std::make_shared<llm::CachingBackend>(backend, shared_cache(*c.cache));
  return backend;
}

inline std::unique_ptr<BasePolicy> make_policy(const PolicyConfig& config, std::shared_ptr<const PreparedData> data,
                                               const RngStreams& streams) {
  const auto& actions = data->data.actions;
  if (const auto* cb = std::get_if<bandit::SpannerGreedyOptions>(&config))
    return std::make_unique<bandit::SpannerGreedyPolicy>(actions, data->context_dim, *cb);
  if (const auto* c = std::get_if<ConstantPolicyConfig>(&config)) {
    struct Named final : BasePolicy {
      ConstantPolicy inner;
      std::string label;
      Named(const ConstantPolicyConfig& c, std::size_t n) : inner(c.action, n, c.group), label(c.name) {}
      PolicyGroup group() const override { return inner.group(); }
      ActionId act(const Context& x, Rng& rng) override { return inner.act(x, rng); }
      std::string name() const override { return label; }
      bool concurrent_act() const override { return true; }
    };
    return std::make_unique<Named>(*c, actions->size());
  }
  const auto& l = std::get<LlmPolicyConfig>(config);
  std::shared_ptr<const llm::Embedder> embedder;
  if (l.embedder == EmbedderKind::Table)
    embedder = std::make_shared<llm::TableEmbedder>(llm::TableEmbedder::for_actions(*actions, l.embedder_seed));
  else
    embedder = std::make_shared<llm::HashingEmbedder>(actions->dim(), l.embedder_seed);
  return std::make_unique<llm::LlmPolicy>(make_backend(l, data, streams), embedder, actions, l.options);
}

struct RunResult {
  MetricsSeries metrics;
  std::vector<InteractionRecord> records;
  std::vector<std::string> policy_names;
};

struct RunOptions {
  bool keep_records = true;
  /// Receives metrics.csv, interactions.jsonl and summary.json.
  std::optional<std::filesystem::path> out_dir;
};

inline nlohmann::json record_json(const InteractionRecord& r) {
  nlohmann::json j{{"t", r.t},
                   {"context_id", r.context_id},
                   {"policy_index", r.policy_index},
                   {"action_id", r.action_id},
                   {"loss", r.loss.value()},
                   {"probs", r.dist_snapshot.probs()}};
  j["cf_cb_reward"] = r.cf_cb_reward ? nlohmann::json(*r.cf_cb_reward) : nlohmann::json();
  j["cf_llm_reward"] = r.cf_llm_reward ? nlohmann::json(*r.cf_llm_reward) : nlohmann::json();
  if (r.fallback) j["fallback"] = true;
  return j;
}

inline nlohmann::json summary_json(const Summary& s) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : s.per_policy) per.push_back({{"name", p.name}, {"group", p.group}, {"sampled", p.sampled}});
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"steps", s.steps},
          {"avg_reward", s.avg_reward},
          {"llm_calls", s.llm_calls},
          {"call_fraction", s.call_fraction},
          {"regret", s.regret},
          {"final_p_cb", s.final_p_cb},
          {"cf_cb_reward", opt(s.cf_cb_reward)},
          {"cf_shadow_reward", opt(s.cf_shadow_reward)},
          {"per_policy", per}};
}

/// Batched select / play / observe / update loop to the horizon, with
/// counterfactual and shadow-bandit tracking that never touches the main
/// trajectory's random streams. On error, metrics gathered so far are written
/// before the exception propagates.
inline RunResult run_experiment(const ExperimentConfig& config, std::shared_ptr<const PreparedData> data,
                                std::uint64_t seed, const RunOptions& options = {}) {
  const RngStreams streams(seed);
  std::vector<std::unique_ptr<BasePolicy>> policies;
  std::vector<PolicyGroup> groups;
  RunResult result;
  for (const auto& pc : config.policies) {
    policies.push_back(make_policy(pc, data, streams));
    groups.push_back(policies.back()->group());
    result.policy_names.push_back(policies.back()->name());
  }

  // Counterfactual targets, resolved before the policies move into the orchestrator.
  bandit::SpannerGreedyPolicy* cf_cb = nullptr;
  std::optional<bandit::SpannerGreedyOptions> cf_options;
  BasePolicy* cf_llm = nullptr;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    auto* cb = dynamic_cast<bandit::SpannerGreedyPolicy*>(policies[i].get());
    const bool wanted = config.counterfactual.cb_policy ? policies[i]->name() == *config.counterfactual.cb_policy : true;
    if (cb && wanted && !cf_cb) {
      cf_cb = cb;
      cf_options = std::get<bandit::SpannerGreedyOptions>(config.policies[i]);
    }
    if (config.counterfactual.llm && !cf_llm && groups[i] == PolicyGroup::LLM) cf_llm = policies[i].get();
  }
  if (config.counterfactual.cb_policy && !cf_cb)
    throw ConfigError("counterfactual.cb_policy '" + *config.counterfactual.cb_policy +
                      "' is not a spanner-greedy policy in the roster");
  std::unique_ptr<bandit::SpannerGreedyPolicy> shadow;
  if (cf_cb && config.counterfactual.shadow)
    shadow = std::make_unique<bandit::SpannerGreedyPolicy>(data->data.actions, data->context_dim, *cf_options);

  std::unique_ptr<selector::SamplingStrategy> strategy;
  if (const auto* c = std::get_if<CorralConfig>(&config.strategy))
    strategy = std::make_unique<selector::CorralStrategy>(groups, c->eta);
  else
    strategy = std::make_unique<selector::ScheduleStrategy>(groups, std::get<selector::ScheduleParams>(config.strategy));
  selector::Orchestrator orch(std::move(policies), std::move(strategy),
                              {config.smoothing, config.budget, config.max_in_flight}, streams);

  Rng shuffle_rng = streams.stream("env/shuffle");
  const auto plan = env::batches(data->data.records.size(), config.environment.stream, shuffle_rng);
  const auto horizon = config.environment.stream.horizon;
  const auto cf_llm_seed = streams.seed_for("counterfactual/llm");

  std::optional<std::ofstream> interactions;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    interactions.emplace(*options.out_dir / "interactions.jsonl");
    if (!*interactions) throw IoError("cannot write " + (*options.out_dir / "interactions.jsonl").string());
  }

  auto& rows = result.metrics.rows;
  auto& summary = result.metrics.summary;
  std::vector<std::int64_t> sampled(orch.size(), 0);
  double reward_sum = 0.0, cf_sum = 0.0, shadow_sum = 0.0;
  std::size_t t = 0;
  std::int64_t calls = 0;
  MetricsRow last;

  auto flush = [&] {
    if (!options.out_dir) return;
    auto out_rows = rows;
    if (t > 0 && (out_rows.empty() || out_rows.back().step != t)) out_rows.push_back(last);
    write_metrics_csv(*options.out_dir / "metrics.csv", out_rows);
  };

  try {
    for (const auto& batch : plan) {
      std::vector<const Context*> contexts;
      for (auto idx : batch) contexts.push_back(&data->data.records[idx].context);

      // Learners are frozen for the whole batch, so scoring first matches
      // what they would have played at each of these steps.
      std::vector<std::optional<double>> cf(batch.size()), sh(batch.size()), cfl(batch.size());
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& rec = data->data.records[batch[j]];
        if (cf_cb) cf[j] = loss_to_reward(env::step(rec, cf_cb->greedy(rec.context)));
        if (shadow) sh[j] = loss_to_reward(env::step(rec, shadow->greedy(rec.context)));
        if (cf_llm) {
          Rng rng(mix_seed(cf_llm_seed, t + j + 1));
          cfl[j] = loss_to_reward(env::step(rec, cf_llm->act(rec.context, rng)));
        }
      }

      auto records = orch.run_batch(contexts, [&](std::size_t j, ActionId a) {
        return env::step(data->data.records[batch[j]], a);
      });

      std::vector<Feedback> llm_feedback;
      for (std::size_t j = 0; j < records.size(); ++j) {
        auto& r = records[j];
        r.cf_cb_reward = cf[j];
        r.cf_llm_reward = cfl[j];
        if (orch.groups()[r.policy_index] == PolicyGroup::LLM) llm_feedback.push_back({contexts[j], r.action_id, r.loss});
      }
      if (shadow && !llm_feedback.empty()) shadow->update(llm_feedback);

      for (std::size_t j = 0; j < records.size(); ++j) {
        const auto& r = records[j];
        ++t;
        ++sampled[r.policy_index];
        if (r.fallback || r.dist_snapshot.group(r.policy_index) == PolicyGroup::LLM) ++calls;
        reward_sum += loss_to_reward(r.loss);
        if (cf[j]) cf_sum += *cf[j];
        if (sh[j]) shadow_sum += *sh[j];
        last.step = t;
        last.avg_reward = reward_sum / static_cast<double>(t);
        last.p_cb = r.dist_snapshot.p_cb();
        last.llm_calls_cum = calls;
        if (cf_cb) last.cf_cb_reward = cf_sum / static_cast<double>(t);
        if (shadow) last.cf_shadow_reward = shadow_sum / static_cast<double>(t);
        if (t % config.log_every == 0 || t == horizon) rows.push_back(last);
        if (interactions) *interactions << record_json(r).dump() << '\n';
      }
      if (options.keep_records)
        result.records.insert(result.records.end(), std::make_move_iterator(records.begin()),
                              std::make_move_iterator(records.end()));
    }
  } catch (...) {
    flush();
    throw;
  }

  summary.steps = t;
  summary.llm_calls = orch.llm_calls();
  if (t > 0) {
    summary.avg_reward = last.avg_reward;
    summary.call_fraction = static_cast<double>(summary.llm_calls) / static_cast<double>(t);
    summary.regret = static_cast<double>(t) - reward_sum;
    summary.final_p_cb = last.p_cb;
    summary.cf_cb_reward = last.cf_cb_reward;
    summary.cf_shadow_reward = last.cf_shadow_reward;
  }
  for (std::size_t i = 0; i < orch.size(); ++i)
    summary.per_policy.push_back({result.policy_names[i], to_string(orch.groups()[i]), sampled[i]});

  if (options.out_dir) {
    flush();
    std::ofstream out(*options.out_dir / "summary.json");
    out << summary_json(summary).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (*options.out_dir / "summary.json").string());
  }
  return result;
}

}  // namespace llmcb::harness
