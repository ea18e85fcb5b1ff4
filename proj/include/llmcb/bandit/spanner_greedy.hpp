#pragma once

#include <memory>
#include <optional>
#include <string>

#include "llmcb/bandit/bilinear_model.hpp"
#include "llmcb/bandit/reduce.hpp"
#include "llmcb/bandit/spanner.hpp"
#include "llmcb/core/types.hpp"

namespace llmcb::bandit {

inline ActionId greedy_action(const BilinearModel& model, const Matrix& action_features, const Context& context) {
  const Vector predicted = model.predict_all(context.embedding, action_features);
  return static_cast<ActionId>(argmin_lowest(predicted));
}

/// With probability epsilon, a uniform member of the spanner; otherwise the
/// action with the smallest predicted loss (lowest id on ties).
inline ActionId select(const BilinearModel& model, const Matrix& action_features, const SpannerSet& spanner,
                       const Context& context, double epsilon, Rng& rng) {
  if (spanner.indices.empty()) throw ConfigError("select: empty spanner");
  if (uniform01(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, spanner.indices.size() - 1);
    return spanner.indices[pick(rng)];
  }
  return greedy_action(model, action_features, context);
}

struct SpannerGreedyOptions {
  std::string name = "spanner-greedy";
  double epsilon = 0.05;
  double spanner_c = 2.0;
  BilinearOptions model;
  /// Reduce action embeddings to this many dimensions before learning.
  std::optional<Eigen::Index> reduce_action_dim;
};

/// Contextual-bandit base learner: bilinear loss regression, epsilon-greedy
/// exploration over a barycentric spanner of the action embeddings.
class SpannerGreedyPolicy final : public BasePolicy {
 public:
  SpannerGreedyPolicy(std::shared_ptr<const ActionSpace> actions, Eigen::Index context_dim,
                      SpannerGreedyOptions options = {})
      : actions_(std::move(actions)), options_(std::move(options)) {
    if (!actions_ || actions_->empty()) throw ConfigError("spanner-greedy needs a non-empty action space");
    if (!(options_.epsilon >= 0.0 && options_.epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0,1]");
    Matrix emb = actions_->embedding_matrix();
    if (options_.reduce_action_dim) emb = reduce_action_embeddings(emb, *options_.reduce_action_dim);
    embeddings_ = emb;
    model_ = BilinearModel(emb.cols(), context_dim, options_.model);
    features_ = Matrix(emb.rows(), emb.cols() + (options_.model.intercept ? 1 : 0));
    for (Eigen::Index i = 0; i < emb.rows(); ++i)
      features_.row(i) = model_.action_features(emb.row(i).transpose()).transpose();
    spanner_ = compute_spanner(emb, options_.spanner_c);
  }

  PolicyGroup group() const override { return PolicyGroup::CB; }
  std::string name() const override { return options_.name; }

  ActionId act(const Context& context, Rng& rng) override {
    check_context(context);
    return select(model_, features_, spanner_, context, options_.epsilon, rng);
  }

  /// Exploit-only choice; does not touch any generator.
  ActionId greedy(const Context& context) const {
    check_context(context);
    return greedy_action(model_, features_, context);
  }

  void update(std::span<const Feedback> batch) override {
    for (const auto& fb : batch) {
      if (!actions_->contains(fb.action)) throw ConfigError("feedback action id out of range");
      model_.update(fb.context->embedding, embeddings_.row(fb.action).transpose(), fb.loss);
    }
  }

  const BilinearModel& model() const { return model_; }
  BilinearModel& model() { return model_; }
  const SpannerSet& spanner() const { return spanner_; }
  const SpannerGreedyOptions& options() const { return options_; }

 private:
  void check_context(const Context& context) const {
    if (context.embedding.size() != model_.context_dim())
      throw ConfigError("context embedding has dimension " + std::to_string(context.embedding.size()) +
                        ", policy expects " + std::to_string(model_.context_dim()));
  }

  std::shared_ptr<const ActionSpace> actions_;
  SpannerGreedyOptions options_;
  Matrix embeddings_;  ///< action embeddings as seen by the model (possibly reduced)
  Matrix features_;    ///< phi(a) rows
  BilinearModel model_;
  SpannerSet spanner_;
};

}  // namespace llmcb::bandit
