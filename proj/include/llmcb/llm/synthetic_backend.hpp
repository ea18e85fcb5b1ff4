#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/llm/generator.hpp"
#include "llmcb/llm/similarity.hpp"

namespace llmcb::llm {

enum class OracleErrorMode {
  /// Wrong answers name the action most similar to the correct one.
  Confusable,
  /// Wrong answers are drawn uniformly from the incorrect actions.
  Uniform,
};

struct OracleParams {
  double accuracy = 0.35;
  std::uint64_t seed = 0;
  OracleErrorMode error_mode = OracleErrorMode::Confusable;
  double top_likelihood = 0.9;
};

/// Correct action ids for a context.
using AnswerKey = std::function<std::vector<ActionId>(const Context&)>;

/// For each action, the other actions ordered by decreasing cosine similarity
/// (lowest id first on ties).
inline std::vector<std::vector<ActionId>> confusion_order(const ActionSpace& actions) {
  const Matrix e = actions.embedding_matrix();
  Vector norms = e.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (norms[i] == 0.0) norms[i] = 1.0;
  const Matrix unit = norms.cwiseInverse().asDiagonal() * e;
  const Matrix sims = unit * unit.transpose();
  std::vector<std::vector<ActionId>> out(actions.size());
  for (std::size_t a = 0; a < actions.size(); ++a) {
    auto& order = out[a];
    for (std::size_t b = 0; b < actions.size(); ++b)
      if (b != a) order.push_back(static_cast<ActionId>(b));
    const auto row = static_cast<Eigen::Index>(a);
    std::stable_sort(order.begin(), order.end(), [&](ActionId x, ActionId y) { return sims(row, x) > sims(row, y); });
  }
  return out;
}

/// Answer generation for the synthetic oracle. With probability `accuracy`
/// rank 1 is a correct action; otherwise rank 1 is a wrong action picked per
/// the error mode. Ranks 2..k are distinct wrong actions drawn uniformly (if
/// enough exist). Likelihoods: top_likelihood at rank 1, then geometrically
/// halving shares of the remaining mass.
inline GeneratorOutput synthetic_generate(const OracleParams& params, const ActionSpace& actions,
                                          std::span<const ActionId> correct,
                                          const std::vector<std::vector<ActionId>>& confusions, Rng& rng, int k) {
  if (!(params.accuracy >= 0.0 && params.accuracy <= 1.0)) throw ConfigError("oracle accuracy must lie in [0,1]");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (correct.empty()) throw ConfigError("synthetic oracle needs at least one correct action");

  auto is_correct = [&](ActionId a) { return std::find(correct.begin(), correct.end(), a) != correct.end(); };
  std::vector<ActionId> wrong;
  for (std::size_t a = 0; a < actions.size(); ++a)
    if (!is_correct(static_cast<ActionId>(a))) wrong.push_back(static_cast<ActionId>(a));

  const bool right = uniform01(rng) < params.accuracy;
  std::uniform_int_distribution<std::size_t> pick_correct(0, correct.size() - 1);
  const ActionId truth = correct[pick_correct(rng)];

  std::vector<ActionId> ranked;
  if (right || wrong.empty()) {
    ranked.push_back(truth);
  } else if (params.error_mode == OracleErrorMode::Confusable) {
    const auto& order = confusions.at(static_cast<std::size_t>(truth));
    ranked.push_back(*std::find_if(order.begin(), order.end(), [&](ActionId a) { return !is_correct(a); }));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
    ranked.push_back(wrong[pick(rng)]);
  }

  std::vector<ActionId> pool;
  for (ActionId a : wrong)
    if (a != ranked.front()) pool.push_back(a);
  while (static_cast<int>(ranked.size()) < k) {
    if (pool.empty()) {
      ranked.push_back(ranked.back());
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const auto at = pick(rng);
    ranked.push_back(pool[at]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
  }

  GeneratorOutput out;
  double share = (1.0 - params.top_likelihood) / 2.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const double q = r == 0 ? params.top_likelihood : share;
    if (r > 0) share /= 2.0;
    out.entries.push_back({actions[static_cast<std::size_t>(ranked[r])].text, q});
  }
  return out;
}

/// Test-double generator that knows the answer key. Output is a pure function
/// of (seed, prompt, k, context id), so repeated calls agree.
class SyntheticOracleBackend final : public GeneratorBackend {
 public:
  SyntheticOracleBackend(std::shared_ptr<const ActionSpace> actions, AnswerKey answers, OracleParams params)
      : actions_(std::move(actions)), answers_(std::move(answers)), params_(params) {
    if (!actions_) throw ConfigError("synthetic backend needs an action space");
    if (!(params_.accuracy >= 0.0 && params_.accuracy <= 1.0)) throw ConfigError("oracle accuracy must lie in [0,1]");
    if (!(params_.top_likelihood > 0.0 && params_.top_likelihood < 1.0))
      throw ConfigError("oracle top likelihood must lie in (0,1)");
    if (params_.error_mode == OracleErrorMode::Confusable) confusions_ = confusion_order(*actions_);
  }

  GeneratorOutput generate(const GenerationRequest& request) override {
    if (!request.context) throw GeneratorError("synthetic backend needs the request context");
    const auto correct = answers_(*request.context);
    std::uint64_t h = mix_seed(params_.seed, fnv1a64(request.prompt));
    h = mix_seed(h, static_cast<std::uint64_t>(request.k));
    h = mix_seed(h, static_cast<std::uint64_t>(request.context->id));
    Rng rng(h);
    return synthetic_generate(params_, *actions_, correct, confusions_, rng, request.k);
  }

  std::string id() const override { return "synthetic-oracle/" + std::to_string(params_.seed); }

 private:
  std::shared_ptr<const ActionSpace> actions_;
  AnswerKey answers_;
  OracleParams params_;
  std::vector<std::vector<ActionId>> confusions_;
};

}  // namespace llmcb::llm
