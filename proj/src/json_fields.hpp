#pragma once

// Field readers shared by the document parsers. Each throws Error{parse}
// naming the offending field path.

#include <optional>
#include <string>
#include <vector>

#include "bonsai/error.hpp"
#include "bonsai/serialize.hpp"

namespace bonsai::detail {

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::parse, path + ": " + what);
}

inline const Json& field(const Json& j, const std::string& path, const char* key) {
    if (!j.is_object()) bad(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) bad(path + "." + key, "missing field");
    return *it;
}

inline std::string get_string(const Json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_string()) bad(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline double get_number(const Json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_number()) bad(path + "." + key, "expected a number");
    return v.get<double>();
}

inline bool get_bool(const Json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_boolean()) bad(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

inline std::optional<double> opt_number(const Json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) bad(path + "." + key, "expected a number or null");
    return it->get<double>();
}

inline std::optional<std::string> opt_string(const Json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) bad(path + "." + key, "expected a string or null");
    return it->get<std::string>();
}

inline const Json& array_field(const Json& j, const std::string& path, const char* key, bool required) {
    static const Json empty = Json::array();
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) bad(path + "." + key, "missing field");
        return empty;
    }
    if (!it->is_array()) bad(path + "." + key, "expected an array");
    return *it;
}

inline std::vector<std::string> string_list(const Json& j, const std::string& path, const char* key) {
    std::vector<std::string> out;
    const auto& arr = array_field(j, path, key, false);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_string()) bad(path + "." + key + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(arr[i].get<std::string>());
    }
    return out;
}

inline Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }


}  // namespace bonsai::detail
