#ifndef DVFP_CSV_HPP
#define DVFP_CSV_HPP

// CSV files with one metadata comment line,
//
//   # dvfp <version> key=value key=value ...
//
// followed by a header row and data rows. Numbers are written with 17
// significant digits so that values round-trip exactly and reruns produce
// identical bytes.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dvfp/error.hpp"

namespace dvfp {

inline constexpr const char* version = "0.1.0";

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // shortest form that reads back to the same double
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// Parses a number written by format_number (also accepts "inf", "infinity", "nan").
inline double parse_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InvalidInput("not a number: '" + s + "'");
    }
    if (used != s.size()) throw InvalidInput("not a number: '" + s + "'");
    return v;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// In-memory CSV table; cells are kept as text.
struct Table {
    Metadata meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header.size()) throw InternalError("Table: row width differs from header");
        rows.push_back(std::move(cells));
    }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw InvalidInput("no column named '" + name + "'");
    }

    std::vector<double> column(const std::string& name) const {
        const std::size_t k = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(parse_number(r[k]));
        return out;
    }

    std::string meta_value(const std::string& key) const {
        for (const auto& [k, v] : meta)
            if (k == key) return v;
        throw InvalidInput("no metadata entry '" + key + "'");
    }
};

inline void write_table(std::ostream& os, const Table& t) {
    os << "# dvfp " << version;
    for (const auto& [k, v] : t.meta) os << ' ' << k << '=' << v;
    os << '\n';
    for (std::size_t k = 0; k < t.header.size(); ++k) os << (k ? "," : "") << t.header[k];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
        os << '\n';
    }
}

inline void write_table(const std::string& path, const Table& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
    write_table(os, t);
    if (!os) throw InvalidInput("failed writing '" + path + "'");
}

inline Table read_table(std::istream& is) {
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq != std::string::npos) t.meta.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
            }
            continue;
        }
        auto cells = split(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != t.header.size()) {
                throw InvalidInput("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                                   " cells, found " + std::to_string(cells.size()));
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw InvalidInput("CSV has no header row");
    return t;
}

inline Table read_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open '" + path + "'");
    return read_table(is);
}

}  // namespace dvfp

#endif
