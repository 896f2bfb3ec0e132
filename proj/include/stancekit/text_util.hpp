#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/error.hpp"

namespace stancekit {

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c == '\''; }

inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Lowercased word tokenization: runs of letters/digits/apostrophes become
/// tokens; each punctuation character stands alone; whitespace separates.
inline std::vector<std::string> word_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            tokens.push_back(to_lower(text.substr(i, j - i)));
            i = j;
        } else {
            tokens.push_back(std::string(1, static_cast<char>(c)));
            ++i;
        }
    }
    return tokens;
}

/// Canonical concept key: lowercase, trimmed, internal whitespace -> '_'.
inline std::string normalize_concept(std::string_view surface) {
    const std::string t = trim(surface);
    std::string out;
    out.reserve(t.size());
    bool in_gap = false;
    for (unsigned char c : t) {
        if (std::isspace(c)) {
            in_gap = true;
            continue;
        }
        if (in_gap) {
            out.push_back('_');
            in_gap = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

inline std::string read_text_file(const std::string& path, const char* module_tag = "io") {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(module_tag, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content,
                            const char* module_tag = "io") {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(module_tag, "cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(module_tag, "write failed: " + path);
}

/// Shortest round-trip decimal form of a double; deterministic across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const char* module_tag = "io") {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(module_tag, "not a number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, const char* module_tag = "io") {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(module_tag, "not an integer: '" + std::string(s) + "'");
    return v;
}

} // namespace stancekit
