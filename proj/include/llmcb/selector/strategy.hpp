#pragma once

#include <memory>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/selector/corral.hpp"
#include "llmcb/selector/schedule.hpp"
#include "llmcb/selector/smoothing.hpp"

namespace llmcb::selector {

/// Index drawn by inverse CDF over the ordered probability vector.
inline std::size_t sample_index(const SamplingDistribution& p, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cumulative += p[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

/// Gates the LLM-group total through the budget and rebalances the groups.
inline SamplingDistribution gate_distribution(const SamplingDistribution& p, const BudgetState& budget) {
  if (p.group_size(PolicyGroup::LLM) == 0 || !budget.limit) return p;
  const double p_llm = p.p_llm();
  const double gated = budget_gate(p_llm, budget);
  if (gated == p_llm) return p;
  if (p.group_size(PolicyGroup::CB) == 0) {
    if (gated < p_llm) throw ConfigError("budget gating needs at least one CB policy to take the remaining mass");
    return p;
  }
  return with_group_totals(p, gated);
}

/// Strategy plug-in behind Algorithm-2's "update sampling strategy" line.
class SamplingStrategy {
 public:
  virtual ~SamplingStrategy() = default;
  /// Unsmoothed distribution for 1-based step t.
  virtual SamplingDistribution current(std::size_t t) const = 0;
  /// Feedback for one example; `sampled_prob` is the probability the index was drawn with.
  virtual void update(std::size_t index, LossValue loss, double sampled_prob) = 0;
  virtual const char* name() const = 0;
};

class CorralStrategy final : public SamplingStrategy {
 public:
  CorralStrategy(std::vector<PolicyGroup> groups, double eta)
      : state_{SamplingDistribution::uniform(std::move(groups)), eta, NoSmoothing{}} {
    if (!(eta > 0.0)) throw ConfigError("corral eta must be > 0");
  }

  SamplingDistribution current(std::size_t) const override { return state_.probs; }
  void update(std::size_t index, LossValue loss, double sampled_prob) override {
    state_ = corral_update(state_, index, loss, sampled_prob);
  }
  const char* name() const override { return "corral"; }
  const CorralState& state() const { return state_; }

 private:
  CorralState state_;
};

/// Decay schedule on the LLM-group total; uniform allocation inside each group.
class ScheduleStrategy final : public SamplingStrategy {
 public:
  ScheduleStrategy(std::vector<PolicyGroup> groups, ScheduleParams params)
      : groups_(std::move(groups)), params_(params) {
    params_.validate();
  }

  SamplingDistribution current(std::size_t t) const override {
    std::size_t n_llm = 0;
    for (auto g : groups_) n_llm += g == PolicyGroup::LLM;
    const std::size_t n_cb = groups_.size() - n_llm;
    double p_llm = n_llm == 0 ? 0.0 : schedule_prob(params_, t);
    if (n_cb == 0) p_llm = 1.0;
    const auto llm_share = n_llm ? allocate_group(p_llm, n_llm) : std::vector<double>{};
    const auto cb_share = n_cb ? allocate_group(1.0 - p_llm, n_cb) : std::vector<double>{};
    std::vector<double> probs(groups_.size());
    for (std::size_t i = 0; i < groups_.size(); ++i)
      probs[i] = groups_[i] == PolicyGroup::LLM ? llm_share.front() : cb_share.front();
    return {std::move(probs), groups_};
  }
  void update(std::size_t, LossValue, double) override {}
  const char* name() const override { return "schedule"; }

 private:
  std::vector<PolicyGroup> groups_;
  ScheduleParams params_;
};

}  // namespace llmcb::selector
