#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ruleopt/errors.hpp"

namespace ruleopt::csv {

/// Minimal RFC-4180-style CSV: comma separator, optional double-quote quoting
/// with "" escapes. Good enough for the cohort and filter files this project
/// reads and writes.
inline std::vector<std::string> parse_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("unterminated quote in CSV line: " + line);
    out.push_back(std::move(cur));
    return out;
}

inline std::string quote(const std::string& field) {
    bool needs = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') needs = true;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << quote(row[i]);
    }
    os << '\n';
}

/// Reads all rows; first row is returned too (caller interprets the header).
inline std::vector<std::vector<std::string>> read_all(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        rows.push_back(parse_line(line));
    }
    return rows;
}

} // namespace ruleopt::csv
