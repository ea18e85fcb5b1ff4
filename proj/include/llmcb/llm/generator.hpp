#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "llmcb/core/types.hpp"

namespace llmcb::llm {

struct GeneratorEntry {
  std::string text;
  double likelihood = 1.0;  ///< opaque positive weight
  friend bool operator==(const GeneratorEntry&, const GeneratorEntry&) = default;
};

/// Ranked top-k outputs of a generator.
struct GeneratorOutput {
  std::vector<GeneratorEntry> entries;

  void validate() const {
    if (entries.empty()) throw GeneratorError("generator returned no outputs");
    for (const auto& e : entries)
      if (!(e.likelihood > 0.0) || !std::isfinite(e.likelihood))
        throw GeneratorError("generator likelihoods must be finite and > 0");
  }
  friend bool operator==(const GeneratorOutput&, const GeneratorOutput&) = default;
};

struct GenerationRequest {
  std::string prompt;
  /// Instruction sent as a separate system message by chat backends; may be empty.
  std::string system;
  int k = 1;
  /// The context the prompt was built from; only test-double backends look at it.
  const Context* context = nullptr;
};

/// Text generator behind an LLM-powered policy. Implementations must allow
/// concurrent generate() calls.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual GeneratorOutput generate(const GenerationRequest& request) = 0;
  /// Stable identifier; part of the response-cache key.
  virtual std::string id() const = 0;
};

}  // namespace llmcb::llm
