#pragma once

#include <string>
#include <string_view>

#include "ciedsim/errors.hpp"
#include "json.hpp"

namespace ciedsim::detail {

using nlohmann::json;

// Field access with dotted-path diagnostics for ParseError messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Reader child(const char* key) const {
    if (!has(key)) fail(key, "missing");
    const json& c = j_.at(key);
    if (!c.is_object() && !c.is_array()) fail(key, "expected object or array");
    return Reader(c, field(key));
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  template <typename T>
  T get(const char* key) const {
    if (!has(key)) fail(key, "missing");
    return convert<T>(j_.at(key), key);
  }

  template <typename T>
  T get_or(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw Error(ErrorCode::parse, "field " + field(key) + ": " + what);
  }

 private:
  std::string field(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

  template <typename T>
  T convert(const json& v, const char* key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          fail(key, "expected non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected string");
    }
    return v.get<T>();
  }

  const json& j_;
  std::string path_;
};

// Line/column of a byte offset, 1-based.
inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline json parse_json_text(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::parse, std::string(what) + ": syntax error at line " + std::to_string(line) +
                                      ", column " + std::to_string(col));
  }
}

}  // namespace ciedsim::detail
