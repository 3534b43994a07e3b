#pragma once

// Field-level helpers for validating loaded JSON documents. Every failure is
// reported as the caller's error type with the document origin in the message.

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace moral_lens::detail {

template <class Err, class Json>
void require_object(const Json& j, std::string_view what, std::string_view origin) {
  if (!j.is_object()) throw Err(std::string(origin) + ": " + std::string(what) + " must be an object");
}

template <class Err, class Json>
void allow_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                std::string_view what, std::string_view origin) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      throw Err(std::string(origin) + ": unknown field '" + it.key() + "' in " + std::string(what));
    }
  }
}

template <class Err, class Json>
const Json& require_field(const Json& j, std::string_view key, std::string_view what,
                          std::string_view origin) {
  auto it = j.find(std::string(key));
  if (it == j.end()) {
    throw Err(std::string(origin) + ": missing field '" + std::string(key) + "' in " +
              std::string(what));
  }
  return *it;
}

template <class Err, class Json>
std::string require_string(const Json& j, std::string_view key, std::string_view what,
                           std::string_view origin, bool allow_empty = false) {
  const Json& v = require_field<Err>(j, key, what, origin);
  if (!v.is_string()) {
    throw Err(std::string(origin) + ": field '" + std::string(key) + "' in " + std::string(what) +
              " must be a string");
  }
  auto s = v.template get<std::string>();
  if (!allow_empty && s.empty()) {
    throw Err(std::string(origin) + ": field '" + std::string(key) + "' in " + std::string(what) +
              " must not be empty");
  }
  return s;
}

template <class Err, class Json>
double require_number(const Json& j, std::string_view key, std::string_view what,
                      std::string_view origin) {
  const Json& v = require_field<Err>(j, key, what, origin);
  if (!v.is_number()) {
    throw Err(std::string(origin) + ": field '" + std::string(key) + "' in " + std::string(what) +
              " must be a number");
  }
  return v.template get<double>();
}

}  // namespace moral_lens::detail
