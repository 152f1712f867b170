#pragma once

// Moment time series and their CSV form.
//
// Schema: t,k,F,F_stderr,delta2,method,n_samples

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace brickdesign {

struct MomentRow {
    int t = 0;
    int k = 1;
    double F = 0.0;
    double F_stderr = 0.0;
    double delta2 = 0.0;
    std::string method;
    std::uint64_t n_samples = 0;
};

struct MomentSeries {
    int d = 2;
    int L = 1;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<MomentRow> rows;

    std::vector<MomentRow> for_k(int k) const {
        std::vector<MomentRow> out;
        for (const auto& r : rows)
            if (r.k == k) out.push_back(r);
        return out;
    }
};

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline constexpr const char* kSeriesHeader = "t,k,F,F_stderr,delta2,method,n_samples";

inline void write_series_csv(std::ostream& os, const std::vector<MomentRow>& rows) {
    os << kSeriesHeader << '\n';
    for (const auto& r : rows)
        os << r.t << ',' << r.k << ',' << format_double(r.F) << ',' << format_double(r.F_stderr)
           << ',' << format_double(r.delta2) << ',' << r.method << ',' << r.n_samples << '\n';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::vector<MomentRow> read_series_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("series csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSeriesHeader) throw std::runtime_error("series csv: unexpected header '" + line + "'");
    std::vector<MomentRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7)
            throw std::runtime_error("series csv: line " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " fields");
        try {
            MomentRow r;
            r.t = std::stoi(cells[0]);
            r.k = std::stoi(cells[1]);
            r.F = std::stod(cells[2]);
            r.F_stderr = std::stod(cells[3]);
            r.delta2 = std::stod(cells[4]);
            r.method = cells[5];
            r.n_samples = std::stoull(cells[6]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::runtime_error("series csv: malformed number on line " + std::to_string(lineno));
        }
    }
    return rows;
}

}  // namespace brickdesign
