#pragma once

#include <memory>
#include <string>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/llm/embedder.hpp"
#include "llmcb/llm/generator.hpp"
#include "llmcb/llm/prompts.hpp"
#include "llmcb/llm/similarity.hpp"

namespace llmcb::llm {

struct LlmPolicyOptions {
  std::string name = "llm";
  int k = 1;
  PromptTemplate prompt;
};

/// Stationary policy over a text generator: prompt, take the top-k outputs,
/// map each to its most similar action, sample by normalized likelihood.
/// Holds no mutable state, so act() may run concurrently.
class LlmPolicy final : public BasePolicy {
 public:
  LlmPolicy(std::shared_ptr<GeneratorBackend> backend, std::shared_ptr<const Embedder> embedder,
            std::shared_ptr<const ActionSpace> actions, LlmPolicyOptions options = {})
      : backend_(std::move(backend)),
        embedder_(std::move(embedder)),
        actions_(std::move(actions)),
        options_(std::move(options)) {
    if (!backend_ || !embedder_ || !actions_ || actions_->empty())
      throw ConfigError("LLM policy needs a backend, an embedder and a non-empty action space");
    if (options_.k < 1) throw ConfigError("k must be >= 1");
    action_embeddings_ = Matrix(static_cast<Eigen::Index>(actions_->size()), embedder_->dim());
    for (std::size_t a = 0; a < actions_->size(); ++a)
      action_embeddings_.row(static_cast<Eigen::Index>(a)) = embedder_->embed((*actions_)[a].text).transpose();
  }

  PolicyGroup group() const override { return PolicyGroup::LLM; }
  std::string name() const override { return options_.name; }
  bool concurrent_act() const override { return true; }

  GenerationRequest request_for(const Context& context) const {
    return {render_template(options_.prompt.user, context), render_template(options_.prompt.system, context),
            options_.k, &context};
  }

  /// The policy's action distribution at `context`; one generator call.
  MatchedDistribution distribution(const Context& context) const {
    const auto output = backend_->generate(request_for(context));
    output.validate();
    std::vector<ActionId> matched;
    matched.reserve(output.entries.size());
    for (const auto& e : output.entries) matched.push_back(match_output(embedder_->embed(e.text), action_embeddings_));
    return build_distribution(output, matched);
  }

  ActionId act(const Context& context, Rng& rng) override { return distribution(context).sample(rng); }

  const Matrix& action_embeddings() const { return action_embeddings_; }
  const LlmPolicyOptions& options() const { return options_; }

 private:
  std::shared_ptr<GeneratorBackend> backend_;
  std::shared_ptr<const Embedder> embedder_;
  std::shared_ptr<const ActionSpace> actions_;
  LlmPolicyOptions options_;
  Matrix action_embeddings_;
};

}  // namespace llmcb::llm
