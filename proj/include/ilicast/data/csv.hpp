#pragma once

// CSV ingestion and emission.
//
//   weekly ILI     date,ili_rate          (week-ending ISO dates, 7 days apart)
//   daily series   date,value             (contiguous ISO dates)
//   query panel    date,<id_1>,...,<id_m> (contiguous ISO dates)
//
// UTF-8, LF line endings, dot decimal separator. Numbers are written with 17
// significant digits so a save/load round trip is exact.

#include "ilicast/data/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ilicast::data {

/// Date-keyed numeric table; empty cells are NaN.
struct CsvTable {
    std::vector<std::string> columns; // excluding the leading date column
    std::vector<Date> dates;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) {
                return i;
            }
        }
        throw InvalidInput("CSV has no column '" + name + "'");
    }
};

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

inline double parse_number(const std::string& cell, std::size_t line_no) {
    if (cell.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError("not a number: '" + cell + "'", line_no);
    }
    return v;
}

inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = detail::split_csv_line(line);
        if (!header_seen) {
            if (cells.empty() || cells[0] != "date") {
                throw ParseError("header must start with 'date'", line_no);
            }
            table.columns.assign(cells.begin() + 1, cells.end());
            header_seen = true;
            continue;
        }
        if (cells.size() != table.columns.size() + 1) {
            throw ParseError("expected " + std::to_string(table.columns.size() + 1) + " fields, found " +
                                 std::to_string(cells.size()),
                             line_no);
        }
        Date d;
        try {
            d = parse_date(cells[0]);
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!table.dates.empty() && d <= table.dates.back()) {
            throw ParseError(d == table.dates.back() ? "duplicate date " + cells[0]
                                                     : "dates must be increasing (" + cells[0] + ")",
                             line_no);
        }
        std::vector<double> row;
        row.reserve(table.columns.size());
        for (std::size_t c = 1; c < cells.size(); ++c) {
            row.push_back(detail::parse_number(cells[c], line_no));
        }
        table.dates.push_back(d);
        table.rows.push_back(std::move(row));
    }
    if (!header_seen) {
        throw ParseError("empty file", 0);
    }
    return table;
}

inline void write_csv_table(const std::filesystem::path& path, const CsvTable& table) {
    std::string out = "date";
    for (const auto& c : table.columns) {
        out += ',' + c;
    }
    out += '\n';
    for (std::size_t r = 0; r < table.dates.size(); ++r) {
        out += format_date(table.dates[r]);
        for (double v : table.rows[r]) {
            out += ',' + format_number(v);
        }
        out += '\n';
    }
    detail::write_atomically(path, out);
}

namespace detail {

inline void require_contiguous(const CsvTable& t) {
    for (std::size_t i = 1; i < t.dates.size(); ++i) {
        if (days_between(t.dates[i - 1], t.dates[i]) != 1) {
            throw DataGapError("daily dates are not contiguous: missing " +
                               format_date(t.dates[i - 1] + Days{1}) + " (before line " + std::to_string(i + 2) +
                               ")");
        }
    }
}

inline std::vector<double> column_values(const CsvTable& t, std::size_t c) {
    std::vector<double> v;
    v.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (std::isnan(t.rows[r][c])) {
            throw ParseError("missing value in column '" + t.columns[c] + "'", r + 2);
        }
        v.push_back(t.rows[r][c]);
    }
    return v;
}

} // namespace detail

inline WeeklySeries weekly_from_table(const CsvTable& t) {
    if (t.columns.size() != 1 || t.columns[0] != "ili_rate") {
        throw InvalidInput("weekly ILI CSV must have header 'date,ili_rate'");
    }
    return WeeklySeries(t.dates, detail::column_values(t, 0));
}

inline DailySeries daily_from_table(const CsvTable& t, std::size_t column = 0) {
    if (t.dates.empty()) {
        throw InvalidInput("daily CSV has no rows");
    }
    detail::require_contiguous(t);
    return DailySeries(t.dates.front(), detail::column_values(t, column));
}

inline QueryPanel panel_from_table(const CsvTable& t) {
    if (t.dates.empty()) {
        throw InvalidInput("query CSV has no rows");
    }
    detail::require_contiguous(t);
    std::vector<DailySeries> series;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        series.emplace_back(t.dates.front(), detail::column_values(t, c));
    }
    return QueryPanel(t.columns, std::move(series));
}

inline WeeklySeries load_weekly_csv(const std::filesystem::path& p) { return weekly_from_table(read_csv_table(p)); }
inline DailySeries load_daily_csv(const std::filesystem::path& p) { return daily_from_table(read_csv_table(p)); }
inline QueryPanel load_panel_csv(const std::filesystem::path& p) { return panel_from_table(read_csv_table(p)); }

using CsvData = std::variant<WeeklySeries, DailySeries, QueryPanel>;

/// Loads any of the three schemas, chosen by header.
inline CsvData load_csv(const std::filesystem::path& p) {
    auto t = read_csv_table(p);
    if (t.columns.size() == 1 && t.columns[0] == "ili_rate") {
        return weekly_from_table(t);
    }
    if (t.columns.size() == 1 && t.columns[0] == "value") {
        return daily_from_table(t);
    }
    return panel_from_table(t);
}

inline void save_csv(const WeeklySeries& w, const std::filesystem::path& p) {
    CsvTable t;
    t.columns = {"ili_rate"};
    t.dates = w.dates();
    for (double v : w.values()) {
        t.rows.push_back({v});
    }
    write_csv_table(p, t);
}

inline void save_csv(const DailySeries& s, const std::filesystem::path& p) {
    CsvTable t;
    t.columns = {"value"};
    for (std::size_t i = 0; i < s.size(); ++i) {
        t.dates.push_back(s.date_at(i));
        t.rows.push_back({s[i]});
    }
    write_csv_table(p, t);
}

inline void save_csv(const QueryPanel& panel, const std::filesystem::path& p) {
    CsvTable t;
    t.columns = panel.ids();
    if (!panel.empty()) {
        const auto& ref = panel[0];
        for (std::size_t i = 0; i < ref.size(); ++i) {
            t.dates.push_back(ref.date_at(i));
            std::vector<double> row;
            for (const auto& s : panel.series()) {
                row.push_back(s[i]);
            }
            t.rows.push_back(std::move(row));
        }
    }
    write_csv_table(p, t);
}

} // namespace ilicast::data
