#pragma once

#include <span>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/llm/generator.hpp"

namespace llmcb::llm {

inline double cosine_similarity(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw ConfigError("cosine_similarity: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw ConfigError("cosine_similarity: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

/// Action whose embedding (row of `action_embeddings`) is most cosine-similar
/// to `output`; lowest id on ties.
inline ActionId match_output(const Vector& output, const Matrix& action_embeddings) {
  if (action_embeddings.rows() == 0) throw ConfigError("match_output: empty action space");
  std::vector<double> sims(static_cast<std::size_t>(action_embeddings.rows()));
  for (Eigen::Index i = 0; i < action_embeddings.rows(); ++i)
    sims[static_cast<std::size_t>(i)] = cosine_similarity(output, action_embeddings.row(i).transpose());
  return static_cast<ActionId>(argmax_lowest(sims));
}

inline ActionId match_output(const Vector& output, const ActionSpace& actions) {
  return match_output(output, actions.embedding_matrix());
}

/// Likelihood-weighted multiset over matched actions.
struct MatchedDistribution {
  std::vector<std::pair<ActionId, double>> pairs;

  ActionId sample(Rng& rng) const {
    if (pairs.size() == 1) return pairs.front().first;
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (const auto& [action, p] : pairs) {
      cumulative += p;
      if (u < cumulative) return action;
    }
    return pairs.back().first;
  }

  /// Total probability on one action (summing repeats).
  double probability_of(ActionId a) const {
    double s = 0.0;
    for (const auto& [action, p] : pairs)
      if (action == a) s += p;
    return s;
  }
};

inline MatchedDistribution build_distribution(const GeneratorOutput& outputs, std::span<const ActionId> matched) {
  if (outputs.entries.size() != matched.size()) throw ConfigError("build_distribution: length mismatch");
  if (matched.empty()) throw ConfigError("build_distribution: no outputs");
  MatchedDistribution out;
  if (matched.size() == 1) {
    out.pairs.emplace_back(matched.front(), 1.0);
    return out;
  }
  double total = 0.0;
  for (const auto& e : outputs.entries) total += e.likelihood;
  if (!(total > 0.0)) throw ConfigError("build_distribution: likelihoods must sum to a positive value");
  for (std::size_t i = 0; i < matched.size(); ++i)
    out.pairs.emplace_back(matched[i], outputs.entries[i].likelihood / total);
  return out;
}

}  // namespace llmcb::llm
