#pragma once

#include <memory>
#include <string>

#include "llmcb/core/types.hpp"
#include "llmcb/env/dataset.hpp"

namespace llmcb::env {

struct SyntheticSpec {
  Eigen::Index context_dim = 16;
  Eigen::Index action_dim = 16;
  std::size_t num_actions = 50;
  std::size_t num_records = 20000;
  std::uint64_t hidden_seed = 0;
};

inline Vector random_unit(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

/// Correct ids under the hidden model: argmax over rows of E W* x (lowest id on ties).
inline std::vector<ActionId> label_by_argmax(const Matrix& action_embeddings, const Matrix& hidden, const Vector& x) {
  const Vector scores = action_embeddings * (hidden * x);
  return {static_cast<ActionId>(argmax_lowest(scores))};
}

/// Realizable environment: hidden W* (d_a x d_x, unit rows), unit action
/// embeddings named "action <id>", i.i.d. unit contexts, one correct action each.
struct SyntheticEnv {
  Dataset data;
  Matrix hidden;
};

inline SyntheticEnv make_synthetic(const SyntheticSpec& spec) {
  if (spec.context_dim < 1 || spec.action_dim < 1) throw ConfigError("synthetic dimensions must be >= 1");
  if (spec.num_actions < 1) throw ConfigError("synthetic environment needs at least one action");
  const RngStreams streams(spec.hidden_seed);
  Rng model_rng = streams.stream("synthetic/model");
  Rng action_rng = streams.stream("synthetic/actions");
  Rng context_rng = streams.stream("synthetic/contexts");

  Matrix hidden(spec.action_dim, spec.context_dim);
  for (Eigen::Index r = 0; r < spec.action_dim; ++r) hidden.row(r) = random_unit(spec.context_dim, model_rng).transpose();

  std::vector<Action> actions;
  for (std::size_t a = 0; a < spec.num_actions; ++a)
    actions.push_back({static_cast<ActionId>(a), "action " + std::to_string(a), random_unit(spec.action_dim, action_rng)});
  auto space = std::make_shared<const ActionSpace>(std::move(actions));
  const Matrix e = space->embedding_matrix();

  std::vector<DatasetRecord> records;
  records.reserve(spec.num_records);
  for (std::size_t t = 0; t < spec.num_records; ++t) {
    DatasetRecord r;
    r.context.id = static_cast<int>(t);
    r.context.embedding = random_unit(spec.context_dim, context_rng);
    r.correct_ids = label_by_argmax(e, hidden, r.context.embedding);
    records.push_back(std::move(r));
  }
  return {{std::move(space), std::move(records)}, std::move(hidden)};
}

}  // namespace llmcb::env
