#pragma once

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "llmcb/llm/generator.hpp"

namespace llmcb::llm {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

/// Content address of a generation: backend id, system message, prompt and k,
/// length-prefixed so no two distinct tuples share an encoding.
inline std::string cache_key(std::string_view backend_id, const GenerationRequest& request) {
  std::string material;
  for (std::string_view part : {backend_id, std::string_view(request.system), std::string_view(request.prompt)}) {
    material += std::to_string(part.size());
    material += ':';
    material += part;
  }
  material += "k=" + std::to_string(request.k);
  return sha256_hex(material);
}

inline nlohmann::json to_json(const GeneratorOutput& out) {
  auto entries = nlohmann::json::array();
  for (const auto& e : out.entries) entries.push_back({{"text", e.text}, {"likelihood", e.likelihood}});
  return entries;
}

inline GeneratorOutput output_from_json(const nlohmann::json& line) {
  GeneratorOutput out;
  for (const auto& e : line.at("entries"))
    out.entries.push_back({e.at("text").get<std::string>(), e.at("likelihood").get<double>()});
  out.validate();
  return out;
}

/// Persistent content-addressed map of generator responses, backed by an
/// append-only JSON-lines file. Concurrent lookups; stores are serialized.
class ResponseCache {
 public:
  /// In-memory only.
  ResponseCache() = default;

  explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        auto out = output_from_json(j);
        if (static_cast<int>(out.entries.size()) > j.at("k").get<int>())
          throw GeneratorError("more entries than k");
        entries_[j.at("key_hash").get<std::string>()] = std::move(out);
      } catch (const std::exception& e) {
        spdlog::warn("{}:{}: skipping corrupt cache entry ({})", path_.string(), lineno, e.what());
      }
    }
  }

  std::optional<GeneratorOutput> lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  void store(const std::string& key, const GenerationRequest& request, const GeneratorOutput& output) {
    std::unique_lock lock(mutex_);
    entries_[key] = output;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to cache file " + path_.string());
    const nlohmann::json line = {
        {"key_hash", key}, {"prompt", request.prompt}, {"k", request.k}, {"entries", to_json(output)}};
    out << line.dump() << '\n';
    if (!out) throw IoError("write failed on cache file " + path_.string());
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, GeneratorOutput> entries_;
};

/// Serves recorded responses only; a miss is a generator failure.
class ReplayBackend final : public GeneratorBackend {
 public:
  /// `recorded_id` is the id of the backend that produced the cache.
  ReplayBackend(std::shared_ptr<const ResponseCache> cache, std::string recorded_id)
      : cache_(std::move(cache)), id_(std::move(recorded_id)) {
    if (!cache_) throw ConfigError("replay backend needs a cache");
  }

  GeneratorOutput generate(const GenerationRequest& request) override {
    if (auto hit = cache_->lookup(cache_key(id_, request))) return *hit;
    throw GeneratorError("replay cache miss for prompt of length " + std::to_string(request.prompt.size()));
  }
  std::string id() const override { return id_; }

 private:
  std::shared_ptr<const ResponseCache> cache_;
  std::string id_;
};

/// Read-through cache in front of another backend.
class CachingBackend final : public GeneratorBackend {
 public:
  CachingBackend(std::shared_ptr<GeneratorBackend> inner, std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {
    if (!inner_ || !cache_) throw ConfigError("caching backend needs a backend and a cache");
  }

  GeneratorOutput generate(const GenerationRequest& request) override {
    const auto key = cache_key(inner_->id(), request);
    if (auto hit = cache_->lookup(key)) return *hit;
    auto out = inner_->generate(request);
    out.validate();
    cache_->store(key, request, out);
    return out;
  }
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<GeneratorBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace llmcb::llm
