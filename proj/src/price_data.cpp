#include "dst/price_data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dst {

namespace {

std::vector<std::string> split(const std::string& line) {
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

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int digits(const std::string& s, std::size_t pos, std::size_t n, const std::string& whole) {
    int v = 0;
    if (pos + n > s.size()) {
        throw DataError("bad timestamp '" + whole + "'");
    }
    const auto res = std::from_chars(s.data() + pos, s.data() + pos + n, v);
    if (res.ec != std::errc() || res.ptr != s.data() + pos + n) {
        throw DataError("bad timestamp '" + whole + "'");
    }
    return v;
}

}  // namespace

std::size_t PriceSeries::column(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) {
            return k;
        }
    }
    throw DataError("price data has no column '" + name + "'");
}

std::string PriceSeries::month(std::size_t i) const {
    return format_timestamp(hours.at(i)).substr(0, 7);
}

std::int64_t parse_timestamp(const std::string& text) {
    using namespace std::chrono;
    const std::string s = trim(text);
    auto bad = [&] { return DataError("bad timestamp '" + text + "'"); };
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
        throw bad();
    }
    const int y = digits(s, 0, 4, text);
    const int mo = digits(s, 5, 2, text);
    const int d = digits(s, 8, 2, text);
    const int hh = digits(s, 11, 2, text);
    const int mi = digits(s, 14, 2, text);
    std::size_t pos = 16;
    int sec = 0;
    if (pos < s.size() && s[pos] == ':') {
        sec = digits(s, pos + 1, 2, text);
        pos += 3;
    }
    int offset_minutes = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            pos += 1;
        } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
            const int sign = s[pos] == '+' ? 1 : -1;
            offset_minutes = sign * (60 * digits(s, pos + 1, 2, text) + digits(s, pos + 4, 2, text));
            pos += 6;
        } else {
            throw bad();
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mi > 59 || sec > 59) {
        throw bad();
    }
    const long minutes = 60L * hh + mi - offset_minutes;
    if (sec != 0 || minutes % 60 != 0) {
        throw DataError("timestamp '" + text + "' is not on the hour");
    }
    return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 24 + minutes / 60;
}

std::string format_timestamp(std::int64_t hour) {
    using namespace std::chrono;
    const std::int64_t day_index = hour >= 0 ? hour / 24 : -((-hour + 23) / 24);
    const int hh = static_cast<int>(hour - day_index * 24);
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh);
    return buf;
}

PriceSeries read_prices_csv(std::istream& in) {
    PriceSeries series;
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("price file is empty");
    }
    const auto header = split(line);
    if (header.size() < 2 || trim(header[0]) != "timestamp") {
        throw DataError("price header must be 'timestamp,<name>,...'");
    }
    for (std::size_t k = 1; k < header.size(); ++k) {
        series.names.push_back(trim(header[k]));
    }
    const std::size_t d = series.names.size();
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != d + 1) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) +
                            " cells, found " + std::to_string(cells.size()));
        }
        std::int64_t hour = 0;
        try {
            hour = parse_timestamp(cells[0]);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!series.hours.empty()) {
            const std::int64_t prev = series.hours.back();
            if (hour == prev) {
                throw DataError("line " + std::to_string(line_no) + ": duplicate timestamp " +
                                format_timestamp(hour));
            }
            if (hour < prev) {
                throw DataError("line " + std::to_string(line_no) + ": timestamp " + format_timestamp(hour) +
                                " goes backwards");
            }
            if (hour > prev + 1) {
                throw DataError("gap in price data: missing " + format_timestamp(prev + 1) + " (line " +
                                std::to_string(line_no) + ")");
            }
        }
        series.hours.push_back(hour);
        for (std::size_t k = 1; k <= d; ++k) {
            const std::string cell = trim(cells[k]);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + cell + "' in column " +
                                series.names[k - 1]);
            }
            values.push_back(v);
        }
    }
    if (series.hours.empty()) {
        throw DataError("price file has no rows");
    }
    series.values = Matrix(series.hours.size(), d, std::move(values));
    return series;
}

PriceSeries load_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open price file '" + path + "'");
    }
    try {
        return read_prices_csv(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_prices_csv(std::ostream& out, const PriceSeries& series) {
    out << "timestamp";
    for (const auto& n : series.names) {
        out << "," << n;
    }
    out << "\n";
    for (std::size_t i = 0; i < series.rows(); ++i) {
        out << format_timestamp(series.hours[i]);
        for (std::size_t k = 0; k < series.names.size(); ++k) {
            out << "," << format_double(series.values(i, k), 2);
        }
        out << "\n";
    }
}

}  // namespace dst
