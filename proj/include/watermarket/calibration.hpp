#pragma once

// Least-squares calibration: the HARA yield curve against (water, yield)
// observations, and the aggregate clearing-price curve against monthly
// market records.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "watermarket/market_core.hpp"

namespace watermarket {

class FitError : public Error {
public:
    using Error::Error;
};

inline constexpr double kMegalitresPerGigalitre = 1000.0;

struct YieldDatum {
    double water = 0.0;  // ML
    double yield = 0.0;  // T
};

/// One month of market records. Water is kept in GL as published.
struct MarketRow {
    std::string month;
    double water_gl = 0.0;
    double actual_price = 0.0;  // $/ML
    double crop_price = 0.0;    // $/T
    std::optional<double> model_price;
    std::optional<double> residual;  // fraction
};

struct FitDiagnostics {
    std::vector<double> residuals;  // relative, per data point
    double rms = 0.0;
    std::size_t starts = 0;
    std::size_t converged = 0;
};

struct HaraYieldFit {
    double a = 0.0;
    double b = 0.0;
    double gamma = 0.0;
    FitDiagnostics diagnostics;

    [[nodiscard]] double predict(double water) const;
};

/// Multi-start Levenberg-Marquardt over (a, b, gamma) with a > 0, b >= 0 and
/// gamma in (0.05, 0.95). Needs at least 4 points and two distinct water values.
[[nodiscard]] HaraYieldFit fit_hara_yield(std::span<const YieldDatum> data);

enum class PriceTarget {
    automatic,  // model_price column when every row has it, else actual_price
    model_column,
    actual_column,
};

struct MarketFitOptions {
    double T = 0.5;  // held fixed: it is confounded with S_a
    PriceTarget target = PriceTarget::automatic;
};

/// Aggregates of a population that the clearing price depends on:
/// S_b = sum b_i/a_i and S_a = sum (1/a_i)^{gamma/(gamma-1)}.
struct MarketAggregateFit {
    double s_b = 0.0;
    double s_a = 0.0;
    double gamma = 0.0;
    double T = 0.0;
    double lambda = 0.0;
    std::size_t participants = 0;  // recorded only
    PriceTarget target = PriceTarget::actual_column;
    FitDiagnostics diagnostics;

    /// Clearing price for total allocation W (ML) and crop price p.
    [[nodiscard]] double model_price(double water_ml, double crop_price) const;
};

[[nodiscard]] MarketAggregateFit fit_market_aggregates(std::span<const MarketRow> rows, double lambda,
                                                       std::size_t participants, MarketFitOptions options = {});

struct TableLine {
    std::string month;
    double water_gl = 0.0;
    double actual_price = 0.0;
    double crop_price = 0.0;
    double model_price = 0.0;
    double residual = 0.0;  // |model - actual| / actual
    std::optional<double> published_model_price;
    std::optional<double> published_residual;
};

struct TableReport {
    std::vector<TableLine> lines;
    std::size_t months_below_10pct = 0;
    double rms_vs_actual = 0.0;
    std::optional<double> rms_vs_published;  // when every row carries a model_price
};

[[nodiscard]] TableReport reproduce_table(const MarketAggregateFit& fit, std::span<const MarketRow> rows);

/// The twelve months July 2015 - June 2016 of the Murray market.
[[nodiscard]] std::vector<MarketRow> murray_2015_16();

}  // namespace watermarket
