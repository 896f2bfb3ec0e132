#pragma once

// Plain-text run configuration.
//
// A config file holds `key = value` rows, optionally grouped under
// `[section]` headers; keys above the first header live at the top level.
// Lines whose first non-blank character is `#` or `;` are comments. Inside
// the program every key is addressed by its dotted name: `section.key`, or
// plain `key` at the top level.
//
// Command-line overrides (`--key=value` or `--key value`) are applied on
// top of the file and take precedence. Every typed getter records the key
// it read; `reject_unknown()` then turns any leftover — misspelled or
// unsupported — key into a ConfigError that names it, so a run refuses bad
// configuration before doing any work. `render()` emits the effective
// (file + overrides) configuration in a canonical form that parses back to
// the same values.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/error.hpp"
#include "stancekit/text_util.hpp"

namespace stancekit::config {

namespace detail {

inline void check_token(const std::string& token, const char* what, std::size_t line) {
    auto complain = [&](const std::string& why) {
        std::string msg = std::string(what) + " '" + token + "' " + why;
        if (line > 0) msg += " at line " + std::to_string(line);
        throw ConfigError(msg);
    };
    if (token.empty()) complain("is empty");
    for (char c : token) {
        if (std::isspace(static_cast<unsigned char>(c))) complain("contains whitespace");
        if (c == '=' || c == '[' || c == ']') complain("contains a reserved character");
    }
}

inline std::string quoted(const std::string& s) { return "'" + s + "'"; }

} // namespace detail

class Config {
public:
    Config() = default;

    /// Parses an INI-style stream. Duplicate keys in one file are rejected:
    /// in a hand-written config a repeat is almost always a mistake.
    static Config parse(std::istream& in) {
        Config cfg;
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string t{trim(line)};
            if (t.empty() || t.front() == '#' || t.front() == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError("unterminated section header at line " +
                                      std::to_string(line_no));
                section = std::string(trim(t.substr(1, t.size() - 2)));
                detail::check_token(section, "section name", line_no);
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected 'key = value' at line " + std::to_string(line_no));
            const std::string key{trim(t.substr(0, eq))};
            detail::check_token(key, "config key", line_no);
            const std::string dotted = section.empty() ? key : section + "." + key;
            if (cfg.values_.count(dotted))
                throw ConfigError("duplicate config key " + detail::quoted(dotted) + " at line " +
                                  std::to_string(line_no));
            cfg.values_[dotted] = std::string(trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    static Config load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + detail::quoted(path));
        return parse(in);
    }

    /// Applies `--key=value` / `--key value` tokens on top of the file
    /// values. A later override of the same key wins.
    void apply_overrides(const std::vector<std::string>& args) {
        for (std::size_t i = 0; i < args.size(); ++i) {
            const std::string& arg = args[i];
            if (arg.rfind("--", 0) != 0)
                throw ConfigError("unexpected argument " + detail::quoted(arg) +
                                  " (overrides look like --key=value)");
            const std::string body = arg.substr(2);
            const auto eq = body.find('=');
            std::string key, value;
            if (eq != std::string::npos) {
                key = std::string(trim(body.substr(0, eq)));
                value = std::string(trim(body.substr(eq + 1)));
            } else {
                key = std::string(trim(body));
                if (i + 1 >= args.size())
                    throw ConfigError("override '--" + key + "' is missing a value");
                value = std::string(trim(args[++i]));
            }
            set(key, value);
        }
    }

    void set(const std::string& dotted_key, std::string value) {
        detail::check_token(dotted_key, "config key", 0);
        values_[dotted_key] = std::move(value);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    // ---- typed getters (each records the key as consumed) ----

    std::string require_string(const std::string& key) {
        const auto v = lookup(key);
        if (!v) throw ConfigError("missing required config key " + detail::quoted(key));
        if (v->empty())
            throw ConfigError("config key " + detail::quoted(key) + " must not be empty");
        return *v;
    }

    std::string get_string(const std::string& key, std::string fallback) {
        const auto v = lookup(key);
        return v ? *v : std::move(fallback);
    }

    long long get_int(const std::string& key, long long fallback) {
        const auto v = lookup(key);
        return v ? parse_integer(key, *v) : fallback;
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) {
        const auto v = lookup(key);
        if (!v) return fallback;
        const long long n = parse_integer(key, *v);
        if (n < 0)
            throw ConfigError("config key " + detail::quoted(key) + ": value " +
                              detail::quoted(*v) + " must not be negative");
        return static_cast<std::size_t>(n);
    }

    double get_double(const std::string& key, double fallback) {
        const auto v = lookup(key);
        return v ? parse_real(key, *v) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) {
        const auto v = lookup(key);
        if (!v) return fallback;
        const std::string t = to_lower(trim(*v));
        if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
        if (t == "0" || t == "false" || t == "no" || t == "off") return false;
        throw ConfigError("config key " + detail::quoted(key) + ": cannot read " +
                          detail::quoted(*v) + " as a boolean");
    }

    /// Comma-separated list; blank entries are dropped. Absent key -> {}.
    std::vector<std::string> get_list(const std::string& key) {
        const auto v = lookup(key);
        std::vector<std::string> out;
        if (!v) return out;
        for (const std::string& piece : split_commas(*v))
            if (!piece.empty()) out.push_back(piece);
        return out;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) {
        const auto v = lookup(key);
        if (!v) return fallback;
        std::vector<double> out;
        for (const std::string& piece : split_commas(*v))
            if (!piece.empty()) out.push_back(parse_real(key, piece));
        return out;
    }

    /// Required key whose value is a path that must already exist.
    std::string require_input_path(const std::string& key) {
        const std::string path = require_string(key);
        check_exists(key, path);
        return path;
    }

    /// Optional path key; when set (non-empty) the path must exist.
    std::string input_path_or(const std::string& key, const std::string& fallback) {
        const std::string path = get_string(key, fallback);
        if (!path.empty()) check_exists(key, path);
        return path;
    }

    /// Rejects every key that no getter has read, naming the offenders.
    void reject_unknown() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key)) unknown.push_back(key);
        if (unknown.empty()) return;
        std::string msg = unknown.size() == 1 ? "unknown config key " : "unknown config keys ";
        for (std::size_t i = 0; i < unknown.size(); ++i) {
            if (i) msg += ", ";
            msg += detail::quoted(unknown[i]);
        }
        throw ConfigError(msg);
    }

    /// Canonical dump of the effective configuration: top-level keys first,
    /// then each section in sorted order. Parsing the result reproduces the
    /// same values.
    std::string render() const {
        std::map<std::string, std::map<std::string, std::string>> groups;
        for (const auto& [dotted, value] : values_) {
            const auto dot = dotted.find('.');
            if (dot == std::string::npos) groups[""][dotted] = value;
            else groups[dotted.substr(0, dot)][dotted.substr(dot + 1)] = value;
        }
        std::ostringstream out;
        bool first = true;
        for (const auto& [section, keys] : groups) {
            if (!section.empty()) {
                if (!first) out << "\n";
                out << "[" << section << "]\n";
            }
            first = false;
            for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
        }
        return out.str();
    }

private:
    std::optional<std::string> lookup(const std::string& key) {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    static long long parse_integer(const std::string& key, const std::string& raw) {
        const std::string s{trim(raw)};
        std::size_t used = 0;
        long long value = 0;
        bool ok = !s.empty();
        if (ok) {
            try {
                value = std::stoll(s, &used);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok || used != s.size())
            throw ConfigError("config key " + detail::quoted(key) + ": cannot read " +
                              detail::quoted(raw) + " as an integer");
        return value;
    }

    static double parse_real(const std::string& key, const std::string& raw) {
        const std::string s{trim(raw)};
        std::size_t used = 0;
        double value = 0;
        bool ok = !s.empty();
        if (ok) {
            try {
                value = std::stod(s, &used);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok || used != s.size())
            throw ConfigError("config key " + detail::quoted(key) + ": cannot read " +
                              detail::quoted(raw) + " as a number");
        return value;
    }

    static void check_exists(const std::string& key, const std::string& path) {
        if (!std::filesystem::exists(path))
            throw ConfigError("config key " + detail::quoted(key) + ": path " +
                              detail::quoted(path) + " does not exist");
    }

    static std::vector<std::string> split_commas(const std::string& raw) {
        std::vector<std::string> out;
        std::string piece;
        std::istringstream in(raw);
        while (std::getline(in, piece, ',')) out.push_back(std::string(trim(piece)));
        return out;
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

} // namespace stancekit::config
