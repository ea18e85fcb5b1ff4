#pragma once

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmcb/core/types.hpp"

namespace llmcb::env {

struct DatasetRecord {
  Context context;
  std::vector<ActionId> correct_ids;
};

/// Binary loss: 0 for any correct action, 1 otherwise.
inline LossValue step(const DatasetRecord& record, ActionId action) {
  const auto& c = record.correct_ids;
  return LossValue(std::find(c.begin(), c.end(), action) != c.end() ? 0.0 : 1.0);
}

struct Dataset {
  std::shared_ptr<const ActionSpace> actions;
  std::vector<DatasetRecord> records;
};

inline constexpr const char* kSchemaVersion = "v1";

namespace detail {

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

/// Unknown keys usually mean the actions and records files were swapped.
inline void check_keys(const nlohmann::ordered_json& j, std::initializer_list<const char*> allowed, const std::string& at) {
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw DataError(at + "unexpected key '" + key + "'");
}

inline Vector parse_embedding(const nlohmann::ordered_json& j, Eigen::Index dim, const std::string& at) {
  if (!j.is_array()) throw DataError(at + "embedding must be an array");
  if (static_cast<Eigen::Index>(j.size()) != dim)
    throw DataError(at + "embedding has dimension " + std::to_string(j.size()) + ", header declares " +
                    std::to_string(dim));
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) throw DataError(at + "embedding entries must be numbers");
    v[i] = x.get<double>();
    if (!std::isfinite(v[i])) throw DataError(at + "embedding entries must be finite");
  }
  return v;
}

/// Calls `row(json, location)` for each non-blank line after the header.
/// Returns the declared dimension, or -1 for an empty file.
template <typename Fn>
Eigen::Index read_jsonl(const std::filesystem::path& path, Fn&& row) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto at = where(path, lineno);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(at + "malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(at + "expected a JSON object");
    if (dim < 0) {
      if (!j.contains("schema") || j["schema"] != kSchemaVersion)
        throw DataError(at + "first line must be the header {\"schema\":\"v1\",\"dim\":<int>}");
      if (!j.contains("dim") || !j["dim"].is_number_integer() || j["dim"].get<long long>() < 1)
        throw DataError(at + "header dim must be a positive integer");
      dim = j["dim"].get<Eigen::Index>();
      continue;
    }
    try {
      row(j, dim, at);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(at + e.what());
    }
  }
  return dim;
}

inline void write_header(std::ostream& out, Eigen::Index dim) {
  out << nlohmann::ordered_json{{"schema", kSchemaVersion}, {"dim", dim}}.dump() << '\n';
}

inline nlohmann::ordered_json embedding_json(const Vector& v) {
  return nlohmann::ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace detail

inline ActionSpace load_actions(const std::filesystem::path& path) {
  std::vector<Action> actions;
  const auto dim = detail::read_jsonl(path, [&](const nlohmann::ordered_json& j, Eigen::Index d, const std::string& at) {
    detail::check_keys(j, {"id", "text", "embedding"}, at);
    Action a;
    a.id = j.at("id").get<ActionId>();
    if (a.id != static_cast<ActionId>(actions.size()))
      throw DataError(at + "action id " + std::to_string(a.id) + " out of order, expected " +
                      std::to_string(actions.size()));
    a.text = j.value("text", std::string());
    a.embedding = detail::parse_embedding(j.at("embedding"), d, at);
    actions.push_back(std::move(a));
  });
  if (dim < 0 || actions.empty()) throw DataError(path.string() + ": action file has no actions");
  return ActionSpace(std::move(actions));
}

/// Records may carry an optional "fields" object of strings used by prompt templates.
inline std::vector<DatasetRecord> load_records(const std::filesystem::path& path, const ActionSpace& actions) {
  std::vector<DatasetRecord> records;
  detail::read_jsonl(path, [&](const nlohmann::ordered_json& j, Eigen::Index d, const std::string& at) {
    detail::check_keys(j, {"id", "text", "embedding", "correct_ids", "fields"}, at);
    DatasetRecord r;
    r.context.id = j.at("id").get<int>();
    r.context.text = j.value("text", std::string());
    r.context.embedding = detail::parse_embedding(j.at("embedding"), d, at);
    if (auto f = j.find("fields"); f != j.end()) {
      if (!f->is_object()) throw DataError(at + "fields must be an object of strings");
      for (const auto& [k, v] : f->items()) r.context.fields.emplace_back(k, v.get<std::string>());
    }
    r.correct_ids = j.at("correct_ids").get<std::vector<ActionId>>();
    if (r.correct_ids.empty()) throw DataError(at + "correct_ids must be non-empty");
    for (ActionId a : r.correct_ids)
      if (!actions.contains(a))
        throw DataError(at + "correct id " + std::to_string(a) + " is not in the action space of size " +
                        std::to_string(actions.size()));
    records.push_back(std::move(r));
  });
  std::vector<int> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.context.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw DataError(path.string() + ": duplicate record id " + std::to_string(*std::adjacent_find(ids.begin(), ids.end())));
  return records;
}

inline Dataset load_dataset(const std::filesystem::path& records_path, const std::filesystem::path& actions_path) {
  auto actions = std::make_shared<const ActionSpace>(load_actions(actions_path));
  auto records = load_records(records_path, *actions);
  return {std::move(actions), std::move(records)};
}

inline void write_actions(const std::filesystem::path& path, const ActionSpace& actions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  detail::write_header(out, actions.dim());
  for (const auto& a : actions.actions())
    out << nlohmann::ordered_json{{"id", a.id}, {"text", a.text}, {"embedding", detail::embedding_json(a.embedding)}}.dump()
        << '\n';
  if (!out) throw IoError("write failed on " + path.string());
}

inline void write_records(const std::filesystem::path& path, const std::vector<DatasetRecord>& records,
                          Eigen::Index dim) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  detail::write_header(out, dim);
  for (const auto& r : records) {
    nlohmann::ordered_json j{{"id", r.context.id},
                     {"text", r.context.text},
                     {"embedding", detail::embedding_json(r.context.embedding)},
                     {"correct_ids", r.correct_ids}};
    if (!r.context.fields.empty()) {
      nlohmann::ordered_json fields = nlohmann::ordered_json::object();
      for (const auto& [k, v] : r.context.fields) fields[k] = v;
      j["fields"] = std::move(fields);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace llmcb::env
