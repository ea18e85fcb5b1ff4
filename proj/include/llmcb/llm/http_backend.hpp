#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmcb/llm/generator.hpp"

namespace llmcb::llm {

struct ChatCompletionsOptions {
  /// Scheme, host and optional port, e.g. "https://api.example.com".
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  /// Environment variable holding the bearer token; no header is sent when unset.
  std::string token_env = "LLMCB_API_TOKEN";
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::seconds timeout{60};
};

/// Parses a chat-completions response into ranked entries. A choice's weight
/// is exp(sum of its token logprobs), or 1 when logprobs are absent.
inline GeneratorOutput parse_chat_response(const nlohmann::json& body) {
  GeneratorOutput out;
  for (const auto& choice : body.at("choices")) {
    GeneratorEntry e;
    e.text = choice.at("message").at("content").get<std::string>();
    e.likelihood = 1.0;
    const auto lp = choice.find("logprobs");
    if (lp != choice.end() && lp->is_object()) {
      const auto content = lp->find("content");
      if (content != lp->end() && content->is_array() && !content->empty()) {
        double sum = 0.0;
        for (const auto& tok : *content) sum += tok.at("logprob").get<double>();
        // Long answers underflow to 0; keep them as the smallest positive weight.
        e.likelihood = std::max(std::exp(sum), std::numeric_limits<double>::min());
      }
    }
    out.entries.push_back(std::move(e));
  }
  out.validate();
  return out;
}

/// Remote generator speaking the chat-completions JSON shape. Each call opens
/// its own connection, so concurrent generate() calls are safe.
class ChatCompletionsBackend final : public GeneratorBackend {
 public:
  explicit ChatCompletionsBackend(ChatCompletionsOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw ConfigError("chat backend needs a base_url");
    if (options_.model.empty()) throw ConfigError("chat backend needs a model name");
    if (options_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (const char* token = std::getenv(options_.token_env.c_str()); token && *token) token_ = token;
  }

  static nlohmann::json request_body(const std::string& model, const GenerationRequest& request) {
    auto messages = nlohmann::json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    return {{"model", model}, {"messages", messages}, {"n", request.k}, {"logprobs", true}};
  }

  GeneratorOutput generate(const GenerationRequest& request) override {
    const std::string body = request_body(options_.model, request).dump();
    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
      httplib::Client client(options_.base_url);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      httplib::Headers headers;
      if (token_) headers.emplace("Authorization", "Bearer " + *token_);
      auto res = client.Post(options_.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw GeneratorError("chat backend returned HTTP " + std::to_string(res->status));
      try {
        return parse_chat_response(nlohmann::json::parse(res->body));
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    throw GeneratorError("chat backend failed after " + std::to_string(options_.max_retries + 1) +
                         " attempts: " + last_error);
  }

  std::string id() const override { return "chat/" + options_.base_url + options_.path + "#" + options_.model; }

 private:
  ChatCompletionsOptions options_;
  std::optional<std::string> token_;
};

}  // namespace llmcb::llm
