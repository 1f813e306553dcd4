// INI/TOML-style key = value configuration files.
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

/// Malformed or inconsistent configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Flat key/value view of a config file. Keys may sit at top level or inside
 * one [section]; the section name is dropped. Values may be quoted.
 */
class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(std::istream& in) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError("config: " + std::string(e.what()));
        }
        KeyValues kv;
        for (const auto& [key, node] : tree) {
            if (node.empty()) {
                kv.put(key, node.data());
            } else {
                for (const auto& [sub, leaf] : node) kv.put(sub, leaf.data());
            }
        }
        return kv;
    }

    static KeyValues parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open '" + path + "'");
        return parse(in);
    }

    static KeyValues parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        used_[key] = true;
        return it->second;
    }

    std::optional<long long> get_int(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        return to_int(key, *v);
    }

    std::optional<std::uint64_t> get_u64(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        std::size_t used = 0;
        std::uint64_t out = 0;
        try {
            if (!v->empty() && v->front() == '-') throw std::invalid_argument("negative");
            out = std::stoull(*v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != v->size()) throw ConfigError("config: '" + key + "' must be an unsigned integer");
        return out;
    }

    std::optional<double> get_double(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        return to_double(key, *v);
    }

    std::optional<bool> get_bool(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ConfigError("config: '" + key + "' must be true or false");
    }

    /// Comma-separated integers, e.g. `50, 100, 200`.
    std::optional<std::vector<long long>> get_int_list(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        std::vector<long long> out;
        for (const auto& tok : split_list(*v)) out.push_back(to_int(key, tok));
        return out;
    }

    std::optional<std::vector<std::string>> get_list(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        return split_list(*v);
    }

    /// Keys never read; lets callers reject typos.
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

private:
    void put(const std::string& key, std::string value) {
        if (values_.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        values_[key] = std::move(value);
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::string cleaned = s;
        if (!cleaned.empty() && cleaned.front() == '[' && cleaned.back() == ']') cleaned = cleaned.substr(1, cleaned.size() - 2);
        std::istringstream in(cleaned);
        while (std::getline(in, cur, ',')) {
            const auto b = cur.find_first_not_of(" \t\"'");
            const auto e = cur.find_last_not_of(" \t\"'");
            if (b == std::string::npos) continue;
            out.push_back(cur.substr(b, e - b + 1));
        }
        return out;
    }

    static long long to_int(const std::string& key, const std::string& s) {
        std::size_t used = 0;
        long long out = 0;
        try {
            out = std::stoll(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw ConfigError("config: '" + key + "' must be an integer, got '" + s + "'");
        return out;
    }

    static double to_double(const std::string& key, const std::string& s) {
        std::size_t used = 0;
        double out = 0;
        try {
            out = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw ConfigError("config: '" + key + "' must be a number, got '" + s + "'");
        return out;
    }

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> used_;
};

}  // namespace jcov
