#pragma once

#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

#include "stancekit/error.hpp"

namespace stancekit {

/// RFC-4180-style CSV: quoted fields may contain separators, doubled quotes,
/// and embedded newlines. `sep` makes the same parser serve TSV files.
class CsvReader {
public:
    explicit CsvReader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

    /// Reads one record; returns false at end of input. `line_number` reports
    /// the 1-based line the record started on (multi-line records count once).
    bool next(std::vector<std::string>& fields, std::size_t* line_number = nullptr) {
        fields.clear();
        int c = in_.peek();
        if (c == std::char_traits<char>::eof()) return false;
        if (line_number) *line_number = line_;
        std::string field;
        bool quoted = false;
        bool any = false;
        while (true) {
            c = in_.get();
            if (c == std::char_traits<char>::eof()) {
                if (quoted) fail("io", "unterminated quoted CSV field at line " + std::to_string(line_));
                fields.push_back(std::move(field));
                ++line_;
                return true;
            }
            any = true;
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(static_cast<char>(c));
                }
            } else if (c == '"' && field.empty()) {
                quoted = true;
            } else if (c == sep_) {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '\r') {
                if (in_.peek() == '\n') in_.get();
                fields.push_back(std::move(field));
                ++line_;
                return true;
            } else if (c == '\n') {
                fields.push_back(std::move(field));
                ++line_;
                return true;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
        (void)any;
    }

private:
    std::istream& in_;
    char sep_;
    std::size_t line_ = 1;
};

/// Header-indexed table loaded fully into memory.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; // source line of each row
    std::unordered_map<std::string, std::size_t> columns;

    static CsvTable read(std::istream& in, char sep = ',') {
        CsvTable t;
        CsvReader reader(in, sep);
        std::vector<std::string> fields;
        std::size_t line = 0;
        if (!reader.next(t.header, &line)) fail("io", "empty CSV input");
        for (std::size_t i = 0; i < t.header.size(); ++i) t.columns.emplace(t.header[i], i);
        while (reader.next(fields, &line)) {
            if (fields.size() == 1 && fields[0].empty()) continue; // blank line
            t.rows.push_back(fields);
            t.row_lines.push_back(line);
        }
        return t;
    }

    bool has_column(const std::string& name) const { return columns.count(name) != 0; }

    std::size_t column(const std::string& name) const {
        auto it = columns.find(name);
        if (it == columns.end()) fail("io", "CSV is missing required column '" + name + "'");
        return it->second;
    }

    /// Field of `row` under `name`; empty string when the row is short.
    const std::string& field(std::size_t row, std::size_t col) const {
        static const std::string empty;
        const auto& r = rows[row];
        return col < r.size() ? r[col] : empty;
    }
};

/// Writes one CSV record, quoting fields only when needed.
inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields, char sep = ',') {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << sep;
        const std::string& f = fields[i];
        const std::string specials{sep, '"', '\n', '\r'};
        const bool needs_quote = f.find_first_of(specials) != std::string::npos;
        if (!needs_quote) {
            out << f;
        } else {
            out << '"';
            for (char c : f) {
                if (c == '"') out << '"';
                out << c;
            }
            out << '"';
        }
    }
    out << '\n';
}

} // namespace stancekit
