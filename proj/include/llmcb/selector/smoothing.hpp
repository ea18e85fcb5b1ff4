#pragma once

#include <type_traits>
#include <variant>
#include <vector>

#include "llmcb/core/types.hpp"

namespace llmcb::selector {

struct NoSmoothing {};
struct ClipSmoothing {
  double p_min = 0.2;
};
struct MixSmoothing {
  double gamma = 0.1;
};
using Smoothing = std::variant<NoSmoothing, ClipSmoothing, MixSmoothing>;

/// Returns p with the LLM group carrying `llm_total` and the CB group the rest.
/// Mass is rescaled proportionally inside each group; a group with no mass that
/// must receive some gets it uniformly.
inline SamplingDistribution with_group_totals(const SamplingDistribution& p, double llm_total) {
  const double targets[2] = {1.0 - llm_total, llm_total};
  const PolicyGroup group_of[2] = {PolicyGroup::CB, PolicyGroup::LLM};
  std::vector<double> out(p.probs());
  for (int g = 0; g < 2; ++g) {
    const std::size_t n = p.group_size(group_of[g]);
    if (n == 0) continue;
    const double current = p.group_total(group_of[g]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (p.group(i) != group_of[g]) continue;
      out[i] = current > 0.0 ? p[i] * (targets[g] / current) : targets[g] / static_cast<double>(n);
    }
  }
  double sum = 0.0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
  return {std::move(out), p.groups()};
}

/// Clip smoothing: if the CB group holds less than p_min, move it to exactly
/// p_min (and the LLM group to 1 - p_min).
inline SamplingDistribution smooth_clip(const SamplingDistribution& p, double p_min) {
  if (!(p_min >= 0.0 && p_min <= 0.5)) throw ConfigError("clip p_min must lie in [0, 0.5]");
  if (p.group_size(PolicyGroup::CB) == 0 || p.group_size(PolicyGroup::LLM) == 0) return p;
  if (p.p_cb() >= p_min) return p;
  return with_group_totals(p, 1.0 - p_min);
}

/// Mixing smoothing: (1 - gamma) p + gamma Unif[M].
inline SamplingDistribution smooth_mix(const SamplingDistribution& p, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("mix gamma must lie in [0, 1]");
  const double u = 1.0 / static_cast<double>(p.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (1.0 - gamma) * p[i] + gamma * u;
  return {std::move(out), p.groups()};
}

inline SamplingDistribution apply_smoothing(const SamplingDistribution& p, const Smoothing& smoothing) {
  return std::visit(
      [&](const auto& s) -> SamplingDistribution {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ClipSmoothing>) return smooth_clip(p, s.p_min);
        else if constexpr (std::is_same_v<S, MixSmoothing>) return smooth_mix(p, s.gamma);
        else return p;
      },
      smoothing);
}

}  // namespace llmcb::selector
