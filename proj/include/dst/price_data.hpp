#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dst/common.hpp"

namespace dst {

/// Hourly multivariate price series with its UTC time index.
struct PriceSeries {
    std::vector<std::string> names;  // one per column
    std::vector<std::int64_t> hours; // hours since 1970-01-01T00:00Z
    Matrix values;                   // hours.size() x names.size()

    std::size_t rows() const { return hours.size(); }
    /// Column index of `name`; throws DataError when absent.
    std::size_t column(const std::string& name) const;
    /// "YYYY-MM" of row i.
    std::string month(std::size_t i) const;
};

/// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space may replace the T) with an
/// optional "Z" or "+HH:MM" / "-HH:MM" suffix. Returns whole hours since
/// the epoch in UTC; minutes and seconds must be zero. Throws DataError.
std::int64_t parse_timestamp(const std::string& text);

/// "YYYY-MM-DDTHH:00:00Z".
std::string format_timestamp(std::int64_t hour);

/// Reads `timestamp,<name_1>,...,<name_D>`. Rows must be strictly hourly:
/// a missing hour raises DataError naming the first gap, a repeated or
/// backwards timestamp a duplicate/order error, and a bad cell a parse
/// error carrying the line number.
PriceSeries read_prices_csv(std::istream& in);
PriceSeries load_prices(const std::string& path);

void write_prices_csv(std::ostream& out, const PriceSeries& series);

}  // namespace dst
