#pragma once

// Small CSV table type for experiment outputs. Cells are stored as strings;
// numeric helpers format doubles with enough digits to round-trip exactly, so
// a table written and read back compares equal cell for cell. No quoting or
// escaping: the writers in this project never emit commas inside cells.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcm {

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_num(std::int64_t v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::vector<std::string>& add_row() {
        rows.emplace_back();
        rows.back().reserve(header.size());
        return rows.back();
    }

    // Column position by name; -1 when absent.
    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw std::invalid_argument("csv: row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
}

inline void write_csv(const std::string& path, const CsvTable& t) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path + " for writing");
    write_csv(os, t);
    if (!os) throw std::runtime_error("csv: write to " + path + " failed");
}

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size())
                throw std::runtime_error("csv: row width does not match the header");
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("csv: cannot open " + path);
    return read_csv(is);
}

} // namespace rcm
