#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include "json.hpp"

#include "ghostforge/errors.hpp"

namespace ghostforge {

using json = nlohmann::json;

namespace jsonio {

/// Reject keys outside the allowed set; unknown keys are configuration errors.
inline void check_keys(const json& obj, const std::string& scope,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(scope + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(scope + ": unknown key \"" + item.key() + "\"");
    }
}

template <typename T>
void get(const json& obj, const std::string& scope, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(scope + "." + key + ": " + e.what());
    }
}

inline json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open JSON file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("JSON parse error in " + path + ": " + e.what());
    }
}

inline void save_file(const json& value, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open JSON file for writing: " + path);
    out << value.dump(2) << "\n";
    if (!out) throw IoError("short write to JSON file: " + path);
}

}  // namespace jsonio
}  // namespace ghostforge
