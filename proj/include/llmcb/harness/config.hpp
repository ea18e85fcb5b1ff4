#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "llmcb/bandit/spanner_greedy.hpp"
#include "llmcb/env/batches.hpp"
#include "llmcb/env/synthetic.hpp"
#include "llmcb/llm/http_backend.hpp"
#include "llmcb/llm/llm_policy.hpp"
#include "llmcb/llm/prompts.hpp"
#include "llmcb/llm/synthetic_backend.hpp"
#include "llmcb/selector/orchestrator.hpp"

namespace llmcb::harness {

inline constexpr const char* kConfigSchema = "v1";

struct JsonlSource {
  std::filesystem::path actions;
  std::filesystem::path records;
};

struct EnvironmentConfig {
  std::variant<env::SyntheticSpec, JsonlSource> source = env::SyntheticSpec{};
  env::StreamSpec stream;
};

struct SyntheticBackendConfig {
  llm::OracleParams oracle;
  /// Derived from the run seed when absent.
  bool seed_given = false;
};
struct ReplayBackendConfig {
  std::filesystem::path cache;
  std::string recorded_id;
};
struct ChatBackendConfig {
  llm::ChatCompletionsOptions options;
  std::optional<std::filesystem::path> cache;
};
using BackendConfig = std::variant<SyntheticBackendConfig, ReplayBackendConfig, ChatBackendConfig>;

enum class EmbedderKind { Table, Hashing };

struct LlmPolicyConfig {
  llm::LlmPolicyOptions options;
  BackendConfig backend = SyntheticBackendConfig{};
  EmbedderKind embedder = EmbedderKind::Table;
  std::uint64_t embedder_seed = 0;
};

struct ConstantPolicyConfig {
  std::string name;
  ActionId action = 0;
  PolicyGroup group = PolicyGroup::CB;
};

using PolicyConfig = std::variant<bandit::SpannerGreedyOptions, LlmPolicyConfig, ConstantPolicyConfig>;

inline std::string policy_name(const PolicyConfig& p) {
  return std::visit([](const auto& c) -> std::string {
    using T = std::decay_t<decltype(c)>;
    if constexpr (std::is_same_v<T, LlmPolicyConfig>) return c.options.name;
    else return c.name;
  }, p);
}

struct CorralConfig {
  double eta = selector::kDefaultEta;
};
using StrategyConfig = std::variant<CorralConfig, selector::ScheduleParams>;

struct CounterfactualConfig {
  /// CB policy whose greedy choice is scored every step; defaults to the first spanner-greedy policy.
  std::optional<std::string> cb_policy;
  bool shadow = true;
  /// Also score the LLM policy every step (one extra generator call per step).
  bool llm = false;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::vector<PolicyConfig> policies;
  StrategyConfig strategy = CorralConfig{};
  selector::Smoothing smoothing = selector::ClipSmoothing{0.2};
  selector::BudgetState budget;
  std::size_t max_in_flight = 1;
  std::vector<std::uint64_t> seeds{0};
  std::size_t log_every = 64;
  CounterfactualConfig counterfactual;
  std::optional<std::filesystem::path> output_dir;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline std::string require_string(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ConfigError(where + "." + key + ": required string");
  return it->get<std::string>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline EnvironmentConfig parse_environment(const json& j, const std::filesystem::path& base) {
  const std::string w = "environment";
  const auto source = require_string(j, "source", w);
  EnvironmentConfig out;
  if (source == "synthetic") {
    check_keys(j, {"source", "context_dim", "action_dim", "num_actions", "num_records", "hidden_seed", "horizon",
                   "batch_size", "epochs", "shuffle"}, w);
    env::SyntheticSpec s;
    s.context_dim = get_or<Eigen::Index>(j, "context_dim", s.context_dim, w);
    s.action_dim = get_or<Eigen::Index>(j, "action_dim", s.action_dim, w);
    s.num_actions = get_or<std::size_t>(j, "num_actions", s.num_actions, w);
    s.hidden_seed = get_or<std::uint64_t>(j, "hidden_seed", s.hidden_seed, w);
    s.num_records = get_or<std::size_t>(j, "num_records", get_or<std::size_t>(j, "horizon", s.num_records, w), w);
    out.source = s;
  } else if (source == "jsonl") {
    check_keys(j, {"source", "actions", "records", "horizon", "batch_size", "epochs", "shuffle"}, w);
    out.source = JsonlSource{resolve(base, require_string(j, "actions", w)), resolve(base, require_string(j, "records", w))};
  } else {
    throw ConfigError(w + ".source must be \"synthetic\" or \"jsonl\"");
  }
  if (!j.contains("horizon")) throw ConfigError(w + ".horizon is required");
  out.stream.horizon = get_or<std::size_t>(j, "horizon", 0, w);
  out.stream.batch_size = get_or<std::size_t>(j, "batch_size", 32, w);
  out.stream.epochs = get_or<std::size_t>(j, "epochs", 1, w);
  out.stream.shuffle = get_or<bool>(j, "shuffle", true, w);
  if (out.stream.batch_size < 1) throw ConfigError(w + ".batch_size must be >= 1");
  if (out.stream.epochs < 1) throw ConfigError(w + ".epochs must be >= 1");
  return out;
}

inline BackendConfig parse_backend(const json& j, const std::filesystem::path& base, const std::string& w) {
  const auto type = require_string(j, "type", w);
  if (type == "synthetic") {
    check_keys(j, {"type", "accuracy", "seed", "error_mode", "top_likelihood"}, w);
    SyntheticBackendConfig c;
    c.oracle.accuracy = get_or<double>(j, "accuracy", c.oracle.accuracy, w);
    c.oracle.top_likelihood = get_or<double>(j, "top_likelihood", c.oracle.top_likelihood, w);
    c.seed_given = j.contains("seed");
    c.oracle.seed = get_or<std::uint64_t>(j, "seed", 0, w);
    const auto mode = get_or<std::string>(j, "error_mode", "confusable", w);
    if (mode == "confusable") c.oracle.error_mode = llm::OracleErrorMode::Confusable;
    else if (mode == "uniform") c.oracle.error_mode = llm::OracleErrorMode::Uniform;
    else throw ConfigError(w + ".error_mode must be \"confusable\" or \"uniform\"");
    if (!(c.oracle.accuracy >= 0.0 && c.oracle.accuracy <= 1.0)) throw ConfigError(w + ".accuracy must lie in [0,1]");
    return c;
  }
  if (type == "replay") {
    check_keys(j, {"type", "cache", "recorded_id"}, w);
    return ReplayBackendConfig{resolve(base, require_string(j, "cache", w)), require_string(j, "recorded_id", w)};
  }
  if (type == "chat") {
    check_keys(j, {"type", "base_url", "path", "model", "token_env", "max_retries", "backoff_ms", "timeout_s", "cache"}, w);
    ChatBackendConfig c;
    c.options.base_url = require_string(j, "base_url", w);
    c.options.model = require_string(j, "model", w);
    c.options.path = get_or<std::string>(j, "path", c.options.path, w);
    c.options.token_env = get_or<std::string>(j, "token_env", c.options.token_env, w);
    c.options.max_retries = get_or<int>(j, "max_retries", c.options.max_retries, w);
    c.options.backoff_base = std::chrono::milliseconds(get_or<long>(j, "backoff_ms", c.options.backoff_base.count(), w));
    c.options.timeout = std::chrono::seconds(get_or<long>(j, "timeout_s", c.options.timeout.count(), w));
    if (j.contains("cache")) c.cache = resolve(base, require_string(j, "cache", w));
    return c;
  }
  throw ConfigError(w + ".type must be \"synthetic\", \"replay\" or \"chat\"");
}

inline llm::PromptTemplate parse_prompt(const json& j, const std::string& w) {
  if (j.is_string()) {
    if (auto t = llm::templates::by_name(j.get<std::string>())) return *t;
    throw ConfigError(w + ": unknown prompt template '" + j.get<std::string>() + "'");
  }
  check_keys(j, {"user", "system"}, w);
  return {require_string(j, "user", w), get_or<std::string>(j, "system", "", w)};
}

inline PolicyConfig parse_policy(const json& j, const std::filesystem::path& base, std::size_t index) {
  const std::string w = "policies[" + std::to_string(index) + "]";
  const auto type = require_string(j, "type", w);
  if (type == "spanner-greedy") {
    check_keys(j, {"type", "name", "epsilon", "spanner_c", "learning_rate", "step_rule", "intercept", "clamp",
                   "reduce_action_dim"}, w);
    bandit::SpannerGreedyOptions o;
    o.name = get_or<std::string>(j, "name", o.name, w);
    o.epsilon = get_or<double>(j, "epsilon", o.epsilon, w);
    o.spanner_c = get_or<double>(j, "spanner_c", o.spanner_c, w);
    o.model.learning_rate = get_or<double>(j, "learning_rate", o.model.learning_rate, w);
    o.model.intercept = get_or<bool>(j, "intercept", o.model.intercept, w);
    o.model.clamp = get_or<bool>(j, "clamp", o.model.clamp, w);
    const auto rule = get_or<std::string>(j, "step_rule", "sgd", w);
    if (rule == "sgd") o.model.step_rule = bandit::StepRule::Sgd;
    else if (rule == "adagrad") o.model.step_rule = bandit::StepRule::AdaGrad;
    else throw ConfigError(w + ".step_rule must be \"sgd\" or \"adagrad\"");
    if (j.contains("reduce_action_dim") && !j["reduce_action_dim"].is_null())
      o.reduce_action_dim = get_or<Eigen::Index>(j, "reduce_action_dim", 0, w);
    if (!(o.epsilon >= 0.0 && o.epsilon <= 1.0)) throw ConfigError(w + ".epsilon must lie in [0,1]");
    if (!(o.spanner_c >= 1.0)) throw ConfigError(w + ".spanner_c must be >= 1");
    return o;
  }
  if (type == "llm") {
    check_keys(j, {"type", "name", "k", "prompt", "backend", "embedder", "embedder_seed"}, w);
    LlmPolicyConfig c;
    c.options.name = get_or<std::string>(j, "name", c.options.name, w);
    c.options.k = get_or<int>(j, "k", 1, w);
    if (c.options.k < 1) throw ConfigError(w + ".k must be >= 1");
    if (j.contains("prompt")) c.options.prompt = parse_prompt(j["prompt"], w + ".prompt");
    if (!j.contains("backend")) throw ConfigError(w + ".backend is required");
    c.backend = parse_backend(j["backend"], base, w + ".backend");
    const auto emb = get_or<std::string>(j, "embedder", "table", w);
    if (emb == "table") c.embedder = EmbedderKind::Table;
    else if (emb == "hashing") c.embedder = EmbedderKind::Hashing;
    else throw ConfigError(w + ".embedder must be \"table\" or \"hashing\"");
    c.embedder_seed = get_or<std::uint64_t>(j, "embedder_seed", 0, w);
    return c;
  }
  if (type == "constant") {
    check_keys(j, {"type", "name", "action", "group"}, w);
    ConstantPolicyConfig c;
    c.action = get_or<ActionId>(j, "action", 0, w);
    c.name = get_or<std::string>(j, "name", "constant-" + std::to_string(c.action), w);
    const auto g = get_or<std::string>(j, "group", "cb", w);
    if (g == "cb") c.group = PolicyGroup::CB;
    else if (g == "llm") c.group = PolicyGroup::LLM;
    else throw ConfigError(w + ".group must be \"cb\" or \"llm\"");
    return c;
  }
  throw ConfigError(w + ".type must be \"spanner-greedy\", \"llm\" or \"constant\"");
}

inline StrategyConfig parse_strategy(const json& j) {
  const std::string w = "strategy";
  const auto type = require_string(j, "type", w);
  if (type == "corral") {
    check_keys(j, {"type", "eta"}, w);
    CorralConfig c{get_or<double>(j, "eta", selector::kDefaultEta, w)};
    if (!(c.eta > 0.0)) throw ConfigError(w + ".eta must be > 0");
    return c;
  }
  if (type == "poly" || type == "exp") {
    check_keys(j, {"type", "scale", "rate", "p_min", "p_max"}, w);
    selector::ScheduleParams p;
    p.kind = type == "poly" ? selector::DecayKind::Poly : selector::DecayKind::Exp;
    p.scale = get_or<double>(j, "scale", p.scale, w);
    p.rate = get_or<double>(j, "rate", p.rate, w);
    p.p_min = get_or<double>(j, "p_min", p.p_min, w);
    p.p_max = get_or<double>(j, "p_max", p.p_max, w);
    p.validate();
    return p;
  }
  if (type == "constant") {
    check_keys(j, {"type", "p_llm"}, w);
    const double p = get_or<double>(j, "p_llm", 0.0, w);
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(w + ".p_llm must lie in [0,1]");
    return selector::ScheduleParams::constant(p);
  }
  throw ConfigError(w + ".type must be \"corral\", \"poly\", \"exp\" or \"constant\"");
}

inline selector::Smoothing parse_smoothing(const json& j) {
  const std::string w = "smoothing";
  const auto type = require_string(j, "type", w);
  if (type == "none") {
    check_keys(j, {"type"}, w);
    return selector::NoSmoothing{};
  }
  if (type == "clip") {
    check_keys(j, {"type", "p_min"}, w);
    const double p = get_or<double>(j, "p_min", 0.2, w);
    if (!(p >= 0.0 && p <= 0.5)) throw ConfigError(w + ".p_min must lie in [0,0.5]");
    return selector::ClipSmoothing{p};
  }
  if (type == "mix") {
    check_keys(j, {"type", "gamma"}, w);
    const double g = get_or<double>(j, "gamma", 0.1, w);
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError(w + ".gamma must lie in [0,1]");
    return selector::MixSmoothing{g};
  }
  throw ConfigError(w + ".type must be \"none\", \"clip\" or \"mix\"");
}

inline selector::BudgetState parse_budget(const json& j) {
  const std::string w = "budget";
  check_keys(j, {"limit", "mode"}, w);
  selector::BudgetState b;
  if (j.contains("limit") && !j["limit"].is_null()) {
    b.limit = get_or<std::int64_t>(j, "limit", 0, w);
    if (*b.limit < 0) throw ConfigError(w + ".limit must be >= 0");
  }
  const auto mode = get_or<std::string>(j, "mode", "scale", w);
  if (mode == "scale") b.mode = selector::BudgetMode::Scale;
  else if (mode == "early-stop") b.mode = selector::BudgetMode::EarlyStop;
  else throw ConfigError(w + ".mode must be \"scale\" or \"early-stop\"");
  return b;
}

}  // namespace detail

/// Parses a config document. Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_or;
  detail::check_keys(j, {"schema", "environment", "policies", "strategy", "smoothing", "budget", "max_in_flight",
                         "seeds", "log_every", "counterfactual", "output_dir"}, "config");
  if (!j.contains("schema") || j["schema"] != kConfigSchema)
    throw ConfigError(std::string("config.schema must be \"") + kConfigSchema + "\"");
  ExperimentConfig c;
  if (!j.contains("environment")) throw ConfigError("config.environment is required");
  c.environment = detail::parse_environment(j["environment"], base_dir);
  if (!j.contains("policies") || !j["policies"].is_array() || j["policies"].empty())
    throw ConfigError("config.policies must be a non-empty array");
  for (std::size_t i = 0; i < j["policies"].size(); ++i)
    c.policies.push_back(detail::parse_policy(j["policies"][i], base_dir, i));
  if (j.contains("strategy")) c.strategy = detail::parse_strategy(j["strategy"]);
  if (j.contains("smoothing")) c.smoothing = detail::parse_smoothing(j["smoothing"]);
  if (j.contains("budget")) c.budget = detail::parse_budget(j["budget"]);
  c.max_in_flight = get_or<std::size_t>(j, "max_in_flight", 1, "config");
  if (j.contains("seeds")) c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "config");
  if (c.seeds.empty()) throw ConfigError("config.seeds must be non-empty");
  c.log_every = get_or<std::size_t>(j, "log_every", 64, "config");
  if (c.log_every < 1) throw ConfigError("config.log_every must be >= 1");
  if (j.contains("counterfactual")) {
    const auto& cf = j["counterfactual"];
    detail::check_keys(cf, {"cb_policy", "shadow", "llm"}, "counterfactual");
    if (cf.contains("cb_policy") && !cf["cb_policy"].is_null())
      c.counterfactual.cb_policy = detail::require_string(cf, "cb_policy", "counterfactual");
    c.counterfactual.shadow = get_or<bool>(cf, "shadow", true, "counterfactual");
    c.counterfactual.llm = get_or<bool>(cf, "llm", false, "counterfactual");
  }
  if (j.contains("output_dir")) c.output_dir = detail::resolve(base_dir, detail::require_string(j, "output_dir", "config"));
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace llmcb::harness
