#pragma once

#include <cctype>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "llmcb/core/types.hpp"

namespace llmcb::llm {

/// Text to vector map g(.) used to match generator outputs against actions.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Vector embed(std::string_view text) const = 0;
  virtual Eigen::Index dim() const = 0;
};

/// Signed feature hashing of lowercase character trigrams. Deterministic for
/// a fixed seed; strings sharing most trigrams land close in cosine.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(Eigen::Index dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ConfigError("hashing embedder dimension must be >= 1");
  }

  Vector embed(std::string_view text) const override {
    std::string padded = "  ";
    for (char c : text) padded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    padded += "  ";
    Vector out = Vector::Zero(dim_);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const std::uint64_t h = mix_seed(seed_, fnv1a64(std::string_view(padded).substr(i, 3)));
      const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
      out[bucket] += (h >> 63) ? 1.0 : -1.0;
    }
    if (out.squaredNorm() == 0.0) out[0] = 1.0;
    return out;
  }
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
  std::uint64_t seed_;
};

/// Exact lookup for known strings (e.g. action texts mapped to their stored
/// embeddings), falling back to another embedder.
class TableEmbedder final : public Embedder {
 public:
  TableEmbedder(std::unordered_map<std::string, Vector> table, std::shared_ptr<const Embedder> fallback)
      : table_(std::move(table)), fallback_(std::move(fallback)) {
    if (!fallback_) throw ConfigError("table embedder needs a fallback");
    for (const auto& [text, v] : table_)
      if (v.size() != fallback_->dim()) throw ConfigError("table embedding for '" + text + "' has wrong dimension");
  }

  static TableEmbedder for_actions(const ActionSpace& actions, std::uint64_t seed = 0) {
    std::unordered_map<std::string, Vector> table;
    for (const auto& a : actions.actions()) table.emplace(a.text, a.embedding);
    return TableEmbedder(std::move(table), std::make_shared<HashingEmbedder>(actions.dim(), seed));
  }

  Vector embed(std::string_view text) const override {
    if (auto it = table_.find(std::string(text)); it != table_.end()) return it->second;
    return fallback_->embed(text);
  }
  Eigen::Index dim() const override { return fallback_->dim(); }

 private:
  std::unordered_map<std::string, Vector> table_;
  std::shared_ptr<const Embedder> fallback_;
};

}  // namespace llmcb::llm
