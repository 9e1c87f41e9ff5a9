#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "watermarket/calibration.hpp"

namespace watermarket {

/// Malformed input file; carries the 1-based line and the offending column.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::string column)
        : Error(what), line_(line), column_(std::move(column)) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Header `month,water_gl,actual_price,crop_price[,model_price][,residual]`
/// in any column order. Empty optional cells are allowed; a residual may be
/// written as a fraction or with a trailing '%'. Water stays in GL.
[[nodiscard]] std::vector<MarketRow> parse_market_csv(std::istream& in);
[[nodiscard]] std::vector<MarketRow> ingest_market_csv(const std::filesystem::path& path);

/// Header `water,yield`.
[[nodiscard]] std::vector<YieldDatum> parse_yield_csv(std::istream& in);
[[nodiscard]] std::vector<YieldDatum> ingest_yield_csv(const std::filesystem::path& path);

/// Writes rows in the ingest schema, numbers at 6 significant digits.
[[nodiscard]] std::string format_market_csv(std::span<const MarketRow> rows);

/// printf("%.6g"), the CSV number format.
[[nodiscard]] std::string csv_number(double x);

}  // namespace watermarket
