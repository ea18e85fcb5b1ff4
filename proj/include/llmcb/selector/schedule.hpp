#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "llmcb/core/errors.hpp"

namespace llmcb::selector {

enum class DecayKind { Poly, Exp };

/// Pre-determined LLM-group probability. `rate` is the polynomial exponent
/// for Poly and the exponential rate for Exp.
struct ScheduleParams {
  DecayKind kind = DecayKind::Poly;
  double scale = 1.0;
  double rate = 1.0;
  double p_min = 0.0;
  double p_max = 0.8;

  void validate() const {
    if (!(0.0 <= p_min && p_min <= p_max && p_max <= 1.0))
      throw ConfigError("schedule bounds must satisfy 0 <= p_min <= p_max <= 1");
    if (!(scale > 0.0)) throw ConfigError("schedule scale must be > 0");
    if (!(rate > 0.0)) throw ConfigError("schedule rate must be > 0");
  }

  static ScheduleParams constant(double p) { return {DecayKind::Poly, 1.0, 1.0, p, p}; }
};

inline double schedule_prob(const ScheduleParams& params, std::size_t t) {
  if (t < 1) throw ConfigError("schedule_prob: t must be >= 1");
  const double td = static_cast<double>(t);
  const double raw = params.kind == DecayKind::Poly ? params.scale / std::pow(td, params.rate)
                                                    : params.scale * std::exp(-params.rate * td);
  return std::min(params.p_max, std::max(params.p_min, raw));
}

inline double expected_llm_calls(const ScheduleParams& params, std::size_t horizon) {
  if (horizon < 1) throw ConfigError("expected_llm_calls: horizon must be >= 1");
  double total = 0.0;
  for (std::size_t t = 1; t <= horizon; ++t) total += schedule_prob(params, t);
  return total;
}

enum class BudgetMode { Scale, EarlyStop };

struct BudgetState {
  std::optional<std::int64_t> limit;  ///< nullopt = unlimited
  std::int64_t used = 0;
  BudgetMode mode = BudgetMode::Scale;

  bool exhausted() const { return limit && used >= *limit; }
};

/// Gated LLM-group probability given calls used so far.
inline double budget_gate(double p_llm, const BudgetState& budget) {
  if (!budget.limit) return p_llm;
  const auto limit = *budget.limit;
  if (budget.used >= limit) return 0.0;
  if (budget.mode == BudgetMode::EarlyStop) return p_llm;
  return p_llm * static_cast<double>(limit - budget.used) / static_cast<double>(limit);
}

inline std::vector<double> allocate_group(double total, std::size_t group_size) {
  if (group_size < 1) throw ConfigError("allocate_group: group must be non-empty");
  return std::vector<double>(group_size, total / static_cast<double>(group_size));
}

}  // namespace llmcb::selector
