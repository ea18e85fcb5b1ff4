#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "llmcb/core/types.hpp"
#include "llmcb/selector/lambda_solver.hpp"
#include "llmcb/selector/smoothing.hpp"

namespace llmcb::selector {

inline constexpr double kDefaultEta = 0.05;
inline constexpr double kImportanceWeightCap = 1e12;

struct CorralState {
  SamplingDistribution probs;
  double eta = kDefaultEta;
  Smoothing smoothing = ClipSmoothing{};
};

struct CorralStep {
  CorralState state;
  double lambda = 0.0;
  std::vector<double> loss_estimate;  ///< importance-weighted loss vector
};

/// Log-barrier OMD step on inverse probabilities.
///
/// The importance weight divides by `sampled_prob`, the probability the index
/// was actually drawn with; it defaults to state.probs[i] when the sampling
/// law equals the unsmoothed distribution.
inline CorralStep corral_update_detailed(const CorralState& state, std::size_t i, LossValue loss,
                                         std::optional<double> sampled_prob = std::nullopt) {
  const auto& p = state.probs;
  if (i >= p.size()) throw ConfigError("corral_update: policy index out of range");
  if (!(p[i] > 0.0)) throw ConfigError("corral_update: selected policy has zero probability");
  if (!(state.eta > 0.0)) throw ConfigError("corral_update: eta must be > 0");
  const double weight_prob = sampled_prob.value_or(p[i]);
  if (!(weight_prob > 0.0)) throw ConfigError("corral_update: sampled probability must be > 0");

  CorralStep out{state, 0.0, std::vector<double>(p.size(), 0.0)};
  if (loss.value() == 0.0) return out;

  out.loss_estimate[i] = std::min(loss.value() / weight_prob, kImportanceWeightCap);

  std::vector<double> inv_p(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) inv_p[j] = 1.0 / p[j];
  out.lambda = solve_lambda(inv_p, state.eta, out.loss_estimate);

  std::vector<double> next(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    next[j] = 1.0 / (inv_p[j] + state.eta * (out.loss_estimate[j] - out.lambda));
  out.state.probs = SamplingDistribution(std::move(next), p.groups());
  return out;
}

inline CorralState corral_update(const CorralState& state, std::size_t i, LossValue loss,
                                 std::optional<double> sampled_prob = std::nullopt) {
  return corral_update_detailed(state, i, loss, sampled_prob).state;
}

}  // namespace llmcb::selector
