#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "llmcb/core/errors.hpp"
#include "llmcb/core/rng.hpp"

namespace llmcb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ActionId = int;

struct Context {
  int id = 0;
  std::string text;
  Vector embedding;
  /// Named text fields for prompt templates (e.g. title/content). Optional.
  std::vector<std::pair<std::string, std::string>> fields;
};

struct Action {
  ActionId id = 0;
  std::string text;
  Vector embedding;
};

/// Ordered action set; ids are the positions 0..size()-1.
class ActionSpace {
 public:
  ActionSpace() = default;

  explicit ActionSpace(std::vector<Action> actions) : actions_(std::move(actions)) {
    if (actions_.empty()) throw ConfigError("action space must contain at least one action");
    const auto dim = actions_.front().embedding.size();
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      if (actions_[i].id != static_cast<ActionId>(i))
        throw ConfigError("action ids must be 0..|A|-1 in order; got id " + std::to_string(actions_[i].id) +
                          " at position " + std::to_string(i));
      if (actions_[i].embedding.size() != dim)
        throw ConfigError("action " + std::to_string(i) + " has embedding dimension " +
                          std::to_string(actions_[i].embedding.size()) + ", expected " + std::to_string(dim));
    }
  }

  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }
  Eigen::Index dim() const { return actions_.empty() ? 0 : actions_.front().embedding.size(); }
  const Action& operator[](std::size_t i) const { return actions_[i]; }
  const std::vector<Action>& actions() const { return actions_; }
  bool contains(ActionId id) const { return id >= 0 && static_cast<std::size_t>(id) < actions_.size(); }

  /// |A| x d matrix of embeddings, one action per row.
  Matrix embedding_matrix() const {
    Matrix out(static_cast<Eigen::Index>(size()), dim());
    for (std::size_t i = 0; i < size(); ++i) out.row(static_cast<Eigen::Index>(i)) = actions_[i].embedding.transpose();
    return out;
  }

 private:
  std::vector<Action> actions_;
};

/// Bounded loss in [0, 1].
class LossValue {
 public:
  constexpr LossValue() = default;
  explicit LossValue(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("loss must lie in [0,1], got " + std::to_string(v));
  }
  constexpr double value() const { return value_; }
  friend constexpr bool operator==(LossValue, LossValue) = default;

 private:
  double value_ = 0.0;
};

inline double loss_to_reward(LossValue loss) { return 1.0 - loss.value(); }
inline LossValue reward_to_loss(double reward) { return LossValue(1.0 - reward); }

enum class PolicyGroup { CB, LLM };

inline const char* to_string(PolicyGroup g) { return g == PolicyGroup::CB ? "cb" : "llm"; }

inline constexpr double kSumTolerance = 1e-9;

/// Probability vector over the M base policies, each tagged with its group.
class SamplingDistribution {
 public:
  SamplingDistribution() = default;

  SamplingDistribution(std::vector<double> probs, std::vector<PolicyGroup> groups)
      : probs_(std::move(probs)), groups_(std::move(groups)) {
    if (probs_.size() != groups_.size()) throw ConfigError("probability and group vectors differ in length");
    if (probs_.empty()) throw ConfigError("sampling distribution needs at least one policy");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw NumericalError("sampling probability must be finite and >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw NumericalError("sampling probabilities sum to " + std::to_string(sum) + ", expected 1");
  }

  static SamplingDistribution uniform(std::vector<PolicyGroup> groups) {
    const double p = 1.0 / static_cast<double>(groups.size());
    return {std::vector<double>(groups.size(), p), std::move(groups)};
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<PolicyGroup>& groups() const { return groups_; }
  PolicyGroup group(std::size_t i) const { return groups_[i]; }

  double group_total(PolicyGroup g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i)
      if (groups_[i] == g) s += probs_[i];
    return s;
  }
  std::size_t group_size(PolicyGroup g) const {
    return static_cast<std::size_t>(std::count(groups_.begin(), groups_.end(), g));
  }
  double p_cb() const { return group_total(PolicyGroup::CB); }
  double p_llm() const { return group_total(PolicyGroup::LLM); }

 private:
  std::vector<double> probs_;
  std::vector<PolicyGroup> groups_;
};

struct InteractionRecord {
  std::size_t t = 0;
  int context_id = 0;
  std::size_t policy_index = 0;
  ActionId action_id = 0;
  LossValue loss;
  /// Distribution actually sampled from at this step (after smoothing and gating).
  SamplingDistribution dist_snapshot;
  std::optional<double> cf_cb_reward;
  std::optional<double> cf_llm_reward;
  /// The sampled LLM policy failed and policy_index names the CB stand-in.
  bool fallback = false;
};

/// One (x_t, a_t, loss) triple handed to learners.
struct Feedback {
  const Context* context = nullptr;
  ActionId action = 0;
  LossValue loss;
};

/// Uniform interface over the M candidates: act on a context, optionally learn.
/// Implementations are single-writer; act() may run concurrently only if
/// concurrent_act() is true.
class BasePolicy {
 public:
  virtual ~BasePolicy() = default;

  virtual PolicyGroup group() const = 0;
  virtual ActionId act(const Context& context, Rng& rng) = 0;
  virtual void update(std::span<const Feedback> /*batch*/) {}
  virtual std::string name() const = 0;
  virtual bool concurrent_act() const { return false; }
};

/// Always plays the same action. Useful as a baseline and in tests.
class ConstantPolicy final : public BasePolicy {
 public:
  ConstantPolicy(ActionId action, std::size_t num_actions, PolicyGroup group = PolicyGroup::CB)
      : action_(action), group_(group) {
    if (action < 0 || static_cast<std::size_t>(action) >= num_actions)
      throw ConfigError("constant policy action out of range");
  }
  PolicyGroup group() const override { return group_; }
  ActionId act(const Context&, Rng&) override { return action_; }
  std::string name() const override { return "constant-" + std::to_string(action_); }
  bool concurrent_act() const override { return true; }

 private:
  ActionId action_;
  PolicyGroup group_;
};

inline ActionId policy_act(BasePolicy& policy, const Context& context, Rng& rng) {
  return policy.act(context, rng);
}

/// Index of the smallest element; ties resolve to the lowest index.
template <typename Range>
std::size_t argmin_lowest(const Range& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < static_cast<std::size_t>(std::size(values)); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

/// Index of the largest element; ties resolve to the lowest index.
template <typename Range>
std::size_t argmax_lowest(const Range& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < static_cast<std::size_t>(std::size(values)); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace llmcb
