#pragma once

// Plain-text experiment configs: "[section]" headers and "key = value" lines,
// '#' comments. Each experiment declares its schema (known keys plus
// defaults); unknown keys are rejected and all defaults are materialized into
// the frozen copy written next to the results, so a run can be reproduced
// from its own output.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbm {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

// Flat "section.key" -> string map parsed from the INI-like text.
class KeyValueConfig {
public:
    static KeyValueConfig parse_string(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ConfigError("config line " + std::to_string(lineno) + ": empty section");
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (cfg.values_.count(full))
                throw ConfigError("config: duplicate key '" + full + "'");
            cfg.values_[full] = value;
        }
        return cfg;
    }

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot read '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str());
    }

    void set(const std::string& full_key, const std::string& value) {
        values_[full_key] = value;
    }

    bool has(const std::string& full_key) const { return values_.count(full_key) > 0; }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// Declares what an experiment accepts. Validation produces the materialized
// key set (provided values over defaults) and rejects anything unknown.
struct SchemaKey {
    std::string key;       // "section.key"
    std::string def;       // default value, serialized
    std::string describe;  // one-line meaning
};

class Schema {
public:
    Schema& add(std::string key, std::string def, std::string describe) {
        keys_.push_back({std::move(key), std::move(def), std::move(describe)});
        return *this;
    }

    const std::vector<SchemaKey>& keys() const { return keys_; }

    std::map<std::string, std::string> materialize(const KeyValueConfig& cfg) const {
        for (const auto& [k, v] : cfg.values()) {
            bool known = false;
            for (const SchemaKey& sk : keys_) known = known || sk.key == k;
            if (!known) throw ConfigError("config: unknown key '" + k + "'");
            (void)v;
        }
        std::map<std::string, std::string> out;
        for (const SchemaKey& sk : keys_) {
            auto it = cfg.values().find(sk.key);
            out[sk.key] = it == cfg.values().end() ? sk.def : it->second;
        }
        return out;
    }

private:
    std::vector<SchemaKey> keys_;
};

// Typed access to a materialized config.
class MaterializedConfig {
public:
    explicit MaterializedConfig(std::map<std::string, std::string> values)
        : values_(std::move(values)) {}

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key) const { return raw(key); }

    double get_double(const std::string& key) const {
        const std::string& s = raw(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not a number: '" + s + "'");
        }
    }

    long long get_int(const std::string& key) const {
        const std::string& s = raw(key);
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not an integer: '" + s + "'");
        }
    }

    std::uint64_t get_u64(const std::string& key) const {
        const std::string& s = raw(key);
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not an unsigned integer: '" + s + "'");
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string& s = raw(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config: key '" + key + "' is not a boolean: '" + s + "'");
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    // Frozen rendering: stable section order, every key present.
    std::string serialize() const {
        std::map<std::string, std::map<std::string, std::string>> sections;
        for (const auto& [k, v] : values_) {
            const std::size_t dot = k.find('.');
            if (dot == std::string::npos)
                sections[""][k] = v;
            else
                sections[k.substr(0, dot)][k.substr(dot + 1)] = v;
        }
        std::ostringstream out;
        bool first = true;
        for (const auto& [sec, kv] : sections) {
            if (!first) out << "\n";
            first = false;
            if (!sec.empty()) out << "[" << sec << "]\n";
            for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
        }
        return out.str();
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace bbm
