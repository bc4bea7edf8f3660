#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "collabnet/error.hpp"

namespace collabnet::detail {

using json = nlohmann::json;

/// Reads one JSON object with field-named errors and rejects keys that were
/// never consumed.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw config_error(path_, label() + " must be an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& node(const std::string& key) {
    if (!node_.contains(key)) throw config_error(qualify(key), key + " required");
    seen_.insert(key);
    return node_.at(key);
  }

  const json* node_if(const std::string& key) {
    if (!node_.contains(key)) return nullptr;
    seen_.insert(key);
    return &node_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    return convert<T>(node(key), key);
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    const json* v = node_if(key);
    return v ? convert<T>(*v, key) : fallback;
  }

  template <class T>
  std::optional<T> get_optional(const std::string& key) {
    const json* v = node_if(key);
    if (!v || v->is_null()) return std::nullopt;
    return convert<T>(*v, key);
  }

  /// Call after all reads; unknown keys are configuration errors.
  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.count(key)) throw config_error(qualify(key), "unknown key " + qualify(key));
    }
  }

  std::string qualify(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string label() const { return path_.empty() ? "document" : path_; }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw config_error(qualify(key), key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw config_error(qualify(key), key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw config_error(qualify(key), key + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw config_error(qualify(key), key + " must be a string");
    }
    return v.get<T>();
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace collabnet::detail
