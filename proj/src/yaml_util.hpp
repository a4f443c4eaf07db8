#pragma once

#include "endo/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <map>
#include <string>

namespace endo::yamlu {

inline int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

template <class Enum>
Enum parse_enum(const YAML::Node& node, const std::map<std::string, Enum>& names, const char* what) {
  const auto s = node.as<std::string>();
  auto it = names.find(s);
  if (it == names.end()) {
    std::string options;
    for (const auto& [k, v] : names) options += (options.empty() ? "" : ", ") + k;
    throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")",
                      line_of(node));
  }
  return it->second;
}

inline double number(const YAML::Node& node, const char* key) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("'") + key + "' must be a number", line_of(node));
  }
}

inline long long integer(const YAML::Node& node, const char* key) {
  try {
    return node.as<long long>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("'") + key + "' must be an integer", line_of(node));
  }
}

inline std::string text(const YAML::Node& node, const char* key) {
  if (!node.IsScalar()) throw ConfigError(std::string("'") + key + "' must be a string", line_of(node));
  return node.as<std::string>();
}

inline void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const char* where) {
  if (!node.IsMap()) throw ConfigError(std::string(where) + " must be a mapping", line_of(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

} // namespace endo::yamlu
