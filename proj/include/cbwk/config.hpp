#pragma once

// Reader for the experiment config files: a TOML subset with [table]
// headers, `key = value` lines, and '#' comments. Values are numbers,
// booleans, "strings", or [arrays] of those (arrays may nest and span lines).

#include "cbwk/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cbwk {

struct ConfigValue {
    enum class Kind { number, boolean, string, array };

    Kind kind = Kind::number;
    double number = 0.0;
    bool integral = false;  // written without '.', 'e' or 'inf'
    bool boolean = false;
    std::string text;
    std::vector<ConfigValue> items;
    int line = 0;
};

/// Keys are "table.key"; keys before any header live in the "" table.
struct ConfigDocument {
    std::map<std::string, ConfigValue> entries;
    std::string origin;

    /// Parses text; errors carry "origin:line:".
    static ConfigDocument parse(const std::string& text, const std::string& origin);
    static ConfigDocument load(const std::string& path);
};

// Typed accessors; all throw ConfigError naming the key and line.
double as_double(const std::string& key, const ConfigValue& v);
std::int64_t as_integer(const std::string& key, const ConfigValue& v);
std::size_t as_count(const std::string& key, const ConfigValue& v);
bool as_bool(const std::string& key, const ConfigValue& v);
std::string as_string(const std::string& key, const ConfigValue& v);
std::vector<double> as_doubles(const std::string& key, const ConfigValue& v);

}  // namespace cbwk
