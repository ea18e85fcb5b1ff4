#pragma once

#include <functional>
#include <future>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/selector/strategy.hpp"

namespace llmcb::selector {

/// Loss of playing `action` on example `index` of the current batch.
using LossFn = std::function<LossValue(std::size_t index, ActionId action)>;

struct OrchestratorOptions {
  Smoothing smoothing = ClipSmoothing{0.2};
  BudgetState budget;
  std::size_t max_in_flight = 1;
};

/// Runs the select / play / observe / update cycle over frozen batches.
///
/// Within a batch the strategy distribution is fixed at batch start; the budget
/// gate is re-evaluated per example against the live call count so the call
/// limit is never overrun. Learner and strategy updates are applied at batch
/// end in example order.
class Orchestrator {
 public:
  Orchestrator(std::vector<std::unique_ptr<BasePolicy>> policies, std::unique_ptr<SamplingStrategy> strategy,
               OrchestratorOptions options, const RngStreams& streams)
      : policies_(std::move(policies)),
        strategy_(std::move(strategy)),
        options_(std::move(options)),
        sampling_rng_(streams.stream("sampling")),
        fallback_rng_(streams.stream("fallback")) {
    if (policies_.empty()) throw ConfigError("orchestrator needs at least one base policy");
    if (!strategy_) throw ConfigError("orchestrator needs a sampling strategy");
    std::unordered_set<std::string> names;
    for (const auto& p : policies_) {
      if (!names.insert(p->name()).second) throw ConfigError("duplicate policy name: " + p->name());
      groups_.push_back(p->group());
      policy_seeds_.push_back(streams.seed_for("policy/" + p->name()));
      policy_rngs_.emplace_back(policy_seeds_.back());
    }
    calls_per_policy_.assign(policies_.size(), 0);
  }

  std::size_t size() const { return policies_.size(); }
  BasePolicy& policy(std::size_t i) { return *policies_[i]; }
  const std::vector<PolicyGroup>& groups() const { return groups_; }
  const SamplingStrategy& strategy() const { return *strategy_; }
  std::size_t steps() const { return step_; }
  std::int64_t llm_calls() const { return options_.budget.used; }
  const std::vector<std::int64_t>& calls_per_policy() const { return calls_per_policy_; }
  const BudgetState& budget() const { return options_.budget; }

  /// Distribution sampled from at the next step if the batch started now.
  SamplingDistribution sampling_distribution() const {
    auto p = apply_smoothing(strategy_->current(step_ + 1), options_.smoothing);
    return gate_distribution(p, options_.budget);
  }

  InteractionRecord run_round(const Context& context, const std::function<LossValue(ActionId)>& loss) {
    const Context* ptr = &context;
    auto records = run_batch(std::span<const Context* const>(&ptr, 1),
                             [&](std::size_t, ActionId a) { return loss(a); });
    return std::move(records.front());
  }

  std::vector<InteractionRecord> run_batch(std::span<const Context* const> contexts, const LossFn& loss) {
    const std::size_t n = contexts.size();
    std::vector<InteractionRecord> records(n);
    if (n == 0) return records;

    const auto smoothed = apply_smoothing(strategy_->current(step_ + 1), options_.smoothing);

    // Sample indices; the gate sees calls committed earlier in this batch.
    std::vector<std::size_t> chosen(n);
    BudgetState live = options_.budget;
    for (std::size_t j = 0; j < n; ++j) {
      auto dist = gate_distribution(smoothed, live);
      chosen[j] = sample_index(dist, sampling_rng_);
      if (dist.group(chosen[j]) == PolicyGroup::LLM) ++live.used;
      records[j].t = step_ + j + 1;
      records[j].context_id = contexts[j]->id;
      records[j].policy_index = chosen[j];
      records[j].dist_snapshot = std::move(dist);
    }

    // CB learners act sequentially on their own streams.
    std::vector<ActionId> actions(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
      if (groups_[chosen[j]] == PolicyGroup::CB) actions[j] = policies_[chosen[j]]->act(*contexts[j], policy_rngs_[chosen[j]]);
    }
    const auto fell_back = play_llm(contexts, chosen, records, actions);

    std::vector<Feedback> feedback(n);
    for (std::size_t j = 0; j < n; ++j) {
      records[j].action_id = actions[j];
      records[j].loss = loss(j, actions[j]);
      feedback[j] = Feedback{contexts[j], actions[j], records[j].loss};
    }

    options_.budget.used = live.used;
    for (std::size_t i = 0; i < policies_.size(); ++i)
      if (groups_[i] == PolicyGroup::CB) policies_[i]->update(feedback);
    for (std::size_t j = 0; j < n; ++j) {
      if (fell_back[j]) continue;
      const auto i = records[j].policy_index;
      strategy_->update(i, records[j].loss, records[j].dist_snapshot[i]);
    }
    step_ += n;
    return records;
  }

 private:
  // LLM-backed examples; independent per example so they may run concurrently.
  // Each call gets a generator derived from (policy seed, step) so results do
  // not depend on execution order.
  std::vector<char> play_llm(std::span<const Context* const> contexts, const std::vector<std::size_t>& chosen,
                std::vector<InteractionRecord>& records, std::vector<ActionId>& actions) {
    std::vector<std::size_t> pending;
    for (std::size_t j = 0; j < chosen.size(); ++j)
      if (groups_[chosen[j]] == PolicyGroup::LLM) pending.push_back(j);
    std::vector<char> failed(chosen.size(), 0);

    auto act_one = [&](std::size_t j) {
      const auto i = chosen[j];
      Rng rng(mix_seed(policy_seeds_[i], records[j].t));
      return policies_[i]->act(*contexts[j], rng);
    };

    const std::size_t width = std::max<std::size_t>(1, options_.max_in_flight);
    for (std::size_t start = 0; start < pending.size(); start += width) {
      const std::size_t stop = std::min(pending.size(), start + width);
      std::vector<std::future<ActionId>> futures;
      for (std::size_t k = start; k < stop; ++k) {
        const auto j = pending[k];
        const bool parallel = width > 1 && policies_[chosen[j]]->concurrent_act();
        futures.push_back(std::async(parallel ? std::launch::async : std::launch::deferred, act_one, j));
      }
      for (std::size_t k = start; k < stop; ++k) {
        const auto j = pending[k];
        ++calls_per_policy_[chosen[j]];
        try {
          actions[j] = futures[k - start].get();
        } catch (const GeneratorError&) {
          failed[j] = 1;
        }
      }
    }

    // Generator failures fall back to a CB policy drawn from the CB part of the
    // step's distribution. The attempted call still counts against the budget,
    // and the step is kept out of the strategy update (no valid importance weight).
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      if (!failed[j]) continue;
      const auto& dist = records[j].dist_snapshot;
      if (dist.group_size(PolicyGroup::CB) == 0) throw GeneratorError("LLM call failed and no CB policy to fall back on");
      auto cb_only = with_group_totals(dist, 0.0);
      const auto i = sample_index(cb_only, fallback_rng_);
      records[j].policy_index = i;
      records[j].fallback = true;
      actions[j] = policies_[i]->act(*contexts[j], policy_rngs_[i]);
    }
    return failed;
  }

  std::vector<std::unique_ptr<BasePolicy>> policies_;
  std::unique_ptr<SamplingStrategy> strategy_;
  OrchestratorOptions options_;
  std::vector<PolicyGroup> groups_;
  std::vector<std::uint64_t> policy_seeds_;
  std::vector<Rng> policy_rngs_;
  std::vector<std::int64_t> calls_per_policy_;
  Rng sampling_rng_;
  Rng fallback_rng_;
  std::size_t step_ = 0;
};

}  // namespace llmcb::selector
