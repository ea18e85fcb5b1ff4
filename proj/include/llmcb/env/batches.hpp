#pragma once

#include <numeric>
#include <vector>

#include "llmcb/core/types.hpp"

namespace llmcb::env {

struct StreamSpec {
  std::size_t horizon = 0;
  std::size_t batch_size = 32;
  /// Passes over the records allowed to reach the horizon.
  std::size_t epochs = 1;
  bool shuffle = true;
};

/// Record indices in play order: each epoch is an independent permutation
/// (identity when shuffle is off), concatenated and cut at the horizon.
inline std::vector<std::size_t> play_order(std::size_t num_records, const StreamSpec& spec, Rng& rng) {
  if (spec.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (spec.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (spec.horizon > num_records * spec.epochs)
    throw ConfigError("horizon " + std::to_string(spec.horizon) + " exceeds " + std::to_string(num_records) +
                      " records x " + std::to_string(spec.epochs) + " epochs");
  std::vector<std::size_t> order;
  order.reserve(spec.horizon);
  std::vector<std::size_t> perm(num_records);
  while (order.size() < spec.horizon) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (spec.shuffle) std::shuffle(perm.begin(), perm.end(), rng);
    const auto take = std::min(perm.size(), spec.horizon - order.size());
    order.insert(order.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return order;
}

/// Contiguous chunks of batch_size; the last may be short.
inline std::vector<std::vector<std::size_t>> batches(std::size_t num_records, const StreamSpec& spec, Rng& rng) {
  const auto order = play_order(num_records, spec, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
    const auto stop = std::min(order.size(), start + spec.batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

}  // namespace llmcb::env
