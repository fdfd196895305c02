#pragma once

#include "dlcox/data_model.hpp"
#include "dlcox/sim_engine.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dlcox {

/// Value of a key in a config table: number, string, bool or a flat array.
struct ConfigValue {
    using Array = std::vector<std::variant<double, std::string>>;
    std::variant<double, std::string, bool, Array> data;

    bool is_number() const { return std::holds_alternative<double>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }
};

/// Flat key = value table. Section headers [name] prefix keys as "name.key".
class ConfigTable {
public:
    static ConfigTable parse(const std::string& text, const std::string& origin = "<config>");
    static ConfigTable load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const ConfigValue& at(const std::string& key) const;
    void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }

    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key, long long fallback) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::string> strings(const std::string& key) const;

    /// Keys never read through an accessor; used to reject typos.
    std::vector<std::string> unused_keys() const;
    const std::map<std::string, ConfigValue>& values() const { return values_; }

private:
    std::map<std::string, ConfigValue> values_;
    mutable std::map<std::string, bool> read_;
};

/// A linear contrast c'beta = a0 parsed from text such as "x2 - x3 = 0" or "0.5*x1 + x4".
struct Contrast {
    std::string text;
    Vector c;
    double a0 = 0.0;
};

Contrast parse_contrast(const std::string& text, const std::vector<std::string>& names);

/// Comma-separated covariate names, e.g. "x2,x3", to the rows of A (unit loadings).
Matrix parse_joint(const std::string& text, const std::vector<std::string>& names);

/// Experiment definition from a config table. Throws ConfigError on bad or unknown keys.
ExperimentSpec experiment_from_config(const ConfigTable& table);

}  // namespace dlcox
