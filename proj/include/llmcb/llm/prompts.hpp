#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "llmcb/core/types.hpp"

namespace llmcb::llm {

/// Prompt with `{name}` placeholders filled from the context. `{text}` and
/// `{id}` are always available; other names come from Context::fields.
struct PromptTemplate {
  std::string user = "{text}";
  std::string system;
};

namespace templates {

/// Masked-mention prediction for encoder-decoder models.
inline PromptTemplate masked_mention() { return {"question: {text_preceding} <extra_id_0>. {text_following}", ""}; }

/// Item-tag prediction, plain instruction style.
inline PromptTemplate item_tag() { return {"Title: {title}\nContent: {content}\nTask: Predict the associated label.", ""}; }

/// Item-tag prediction in a turn-marked instruction format.
inline PromptTemplate item_tag_turns() {
  return {"<bos><start_of_turn>user\nTitle: {title}\nContent: {content}\n"
          "Task: Predict the item tag based on the content and title.<end_of_turn>\n<start_of_turn>model\n",
          ""};
}

/// Item-tag prediction with the instruction as a system message.
inline PromptTemplate item_tag_chat() {
  return {"Title: {title}\nContent: {content}", "Predict the item tag based on the content and title."};
}

inline std::optional<PromptTemplate> by_name(std::string_view name) {
  if (name == "plain") return PromptTemplate{};
  if (name == "masked-mention") return masked_mention();
  if (name == "item-tag") return item_tag();
  if (name == "item-tag-turns") return item_tag_turns();
  if (name == "item-tag-chat") return item_tag_chat();
  return std::nullopt;
}

}  // namespace templates

inline std::string render_template(std::string_view tmpl, const Context& context) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const auto name = tmpl.substr(open + 1, close - open - 1);
    if (name == "text") {
      out += context.text;
    } else if (name == "id") {
      out += std::to_string(context.id);
    } else {
      auto it = std::find_if(context.fields.begin(), context.fields.end(),
                             [&](const auto& f) { return f.first == name; });
      if (it == context.fields.end())
        throw ConfigError("prompt field '" + std::string(name) + "' missing from context " +
                          std::to_string(context.id));
      out += it->second;
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace llmcb::llm
