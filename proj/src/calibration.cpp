#include "watermarket/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace watermarket {

namespace {

constexpr double kGammaLo = 0.05;
constexpr double kGammaHi = 0.95;

double gamma_from(double u) { return kGammaLo + (kGammaHi - kGammaLo) / (1.0 + std::exp(-u)); }

double gamma_to(double g) {
    const double s = (g - kGammaLo) / (kGammaHi - kGammaLo);
    return std::log(s / (1.0 - s));
}

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LeastSquaresFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    ResidualFn fn;
    int n_inputs;
    int n_values;

    int inputs() const { return n_inputs; }
    int values() const { return n_values; }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        fn(x, r);
        return 0;
    }
};

struct LocalFit {
    Eigen::VectorXd x;
    double cost = std::numeric_limits<double>::infinity();
    bool converged = false;
};

LocalFit minimize(const ResidualFn& fn, int n_values, Eigen::VectorXd start) {
    LeastSquaresFunctor functor{fn, static_cast<int>(start.size()), n_values};
    Eigen::NumericalDiff<LeastSquaresFunctor, Eigen::Central> diff(functor);
    Eigen::LevenbergMarquardt<decltype(diff)> lm(diff);
    lm.parameters.xtol = 1e-15;
    lm.parameters.ftol = 1e-15;
    lm.parameters.maxfev = 4000;
    const auto status = lm.minimize(start);

    LocalFit out;
    out.x = start;
    Eigen::VectorXd r(n_values);
    fn(start, r);
    const double cost = r.squaredNorm();
    if (std::isfinite(cost)) out.cost = cost;
    using Status = Eigen::LevenbergMarquardtSpace::Status;
    out.converged = std::isfinite(cost) && (status == Status::RelativeReductionTooSmall ||
                                            status == Status::RelativeErrorTooSmall ||
                                            status == Status::RelativeErrorAndReductionTooSmall ||
                                            status == Status::CosinusTooSmall || status == Status::FtolTooSmall ||
                                            status == Status::XtolTooSmall || status == Status::GtolTooSmall);
    return out;
}

FitDiagnostics diagnose(const std::vector<double>& residuals, std::size_t starts, std::size_t converged) {
    FitDiagnostics d;
    d.residuals = residuals;
    double sq = 0.0;
    for (double r : residuals) sq += r * r;
    d.rms = residuals.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(residuals.size()));
    d.starts = starts;
    d.converged = converged;
    return d;
}

double hara_yield(double water, double a, double b, double g) {
    const double base = a * water / (1.0 - g) + b;
    if (base < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (1.0 - g) / g * std::pow(base, g);
}

}  // namespace

double HaraYieldFit::predict(double water) const { return hara_yield(water, a, b, gamma); }

HaraYieldFit fit_hara_yield(std::span<const YieldDatum> data) {
    if (data.size() < 4) throw FitError("fit_hara_yield: need at least 4 data points");
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end(),
                                              [](const YieldDatum& x, const YieldDatum& y) { return x.water < y.water; });
    if (lo->water == hi->water) throw FitError("fit_hara_yield: water values are all equal");

    double mean_w = 0.0;
    double mean_y = 0.0;
    for (const auto& d : data) {
        if (!(d.water >= 0.0) || !(d.yield >= 0.0)) throw FitError("fit_hara_yield: negative observation");
        mean_w += d.water;
        mean_y += d.yield;
    }
    mean_w /= static_cast<double>(data.size());
    mean_y /= static_cast<double>(data.size());
    if (!(mean_y > 0.0)) throw FitError("fit_hara_yield: all yields are zero");

    // Relative residuals where the observation is positive, scaled by the mean otherwise.
    auto scale_of = [&](const YieldDatum& d) { return d.yield > 0.0 ? d.yield : mean_y; };
    // x = (log a, sqrt(b / b_ref), logit gamma)
    double b_ref = 1.0;
    auto unpack = [&](const Eigen::VectorXd& x) {
        return std::array<double, 3>{std::exp(x[0]), b_ref * x[1] * x[1], gamma_from(x[2])};
    };
    const ResidualFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const auto [a, b, g] = unpack(x);
        for (std::size_t k = 0; k < data.size(); ++k)
            r[static_cast<Eigen::Index>(k)] = (hara_yield(data[k].water, a, b, g) - data[k].yield) / scale_of(data[k]);
    };

    LocalFit best;
    std::size_t starts = 0;
    std::size_t converged = 0;
    const int n_values = static_cast<int>(data.size());
    for (double g : {0.2, 0.35, 0.5, 0.65, 0.8}) {
        // Base level at which the curve reaches the mean yield.
        const double x_ref = std::pow(mean_y * g / (1.0 - g), 1.0 / g);
        b_ref = x_ref;
        const double a_ref = x_ref * (1.0 - g) / std::max(mean_w, std::numeric_limits<double>::min());
        for (double a_mult : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            for (double b_mult : {0.0, 0.1, 1.0, 3.0}) {
                Eigen::VectorXd x(3);
                x << std::log(a_ref * a_mult), std::sqrt(b_mult) + (b_mult == 0.0 ? 1e-3 : 0.0), gamma_to(g);
                auto fit = minimize(fn, n_values, x);
                ++starts;
                if (fit.converged) ++converged;
                if (fit.cost < best.cost) {
                    const auto [a, b, gg] = unpack(fit.x);
                    best = fit;
                    best.x = Eigen::Vector3d(a, b, gg);
                }
            }
        }
    }
    if (!std::isfinite(best.cost) || converged == 0) throw FitError("fit_hara_yield: no start converged");

    HaraYieldFit out;
    out.a = best.x[0];
    out.b = best.x[1];
    out.gamma = best.x[2];
    std::vector<double> residuals;
    for (const auto& d : data) residuals.push_back((out.predict(d.water) - d.yield) / scale_of(d));
    out.diagnostics = diagnose(residuals, starts, converged);
    return out;
}

double MarketAggregateFit::model_price(double water_ml, double crop_price) const {
    const double ratio = (water_ml / (1.0 - gamma) + s_b) / s_a;
    return std::pow(ratio, gamma - 1.0) * crop_price * std::exp(-lambda * T);
}

MarketAggregateFit fit_market_aggregates(std::span<const MarketRow> rows, double lambda, std::size_t participants,
                                         MarketFitOptions options) {
    if (rows.size() < 4) throw FitError("fit_market_aggregates: need at least 4 rows");
    if (!(options.T > 0.0)) throw FitError("fit_market_aggregates: T must be positive");

    PriceTarget target = options.target;
    if (target == PriceTarget::automatic) {
        const bool all_model = std::all_of(rows.begin(), rows.end(), [](const MarketRow& r) { return r.model_price.has_value(); });
        target = all_model ? PriceTarget::model_column : PriceTarget::actual_column;
    }
    std::vector<double> water(rows.size());
    std::vector<double> goal(rows.size());
    double mean_w = 0.0;
    double mean_ratio = 0.0;  // mean of log(q / (p e^{-lambda T}))
    const double discount = std::exp(-lambda * options.T);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        water[k] = r.water_gl * kMegalitresPerGigalitre;
        if (target == PriceTarget::model_column) {
            if (!r.model_price) throw FitError("fit_market_aggregates: row " + r.month + " has no model_price");
            goal[k] = *r.model_price;
        } else {
            goal[k] = r.actual_price;
        }
        if (!(water[k] > 0.0) || !(goal[k] > 0.0) || !(r.crop_price > 0.0))
            throw FitError("fit_market_aggregates: row " + r.month + " has a non-positive field");
        mean_w += water[k];
        mean_ratio += std::log(goal[k] / (r.crop_price * discount));
    }
    mean_w /= static_cast<double>(rows.size());
    mean_ratio /= static_cast<double>(rows.size());

    MarketAggregateFit fit;
    fit.lambda = lambda;
    fit.T = options.T;
    fit.participants = participants;
    fit.target = target;

    // x = (sqrt(S_b / mean_w), log S_a, logit gamma)
    auto unpack = [&](const Eigen::VectorXd& x) {
        MarketAggregateFit f = fit;
        f.s_b = mean_w * x[0] * x[0];
        f.s_a = std::exp(x[1]);
        f.gamma = gamma_from(x[2]);
        return f;
    };
    const ResidualFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& res) {
        const auto f = unpack(x);
        for (std::size_t k = 0; k < rows.size(); ++k)
            res[static_cast<Eigen::Index>(k)] = f.model_price(water[k], rows[k].crop_price) / goal[k] - 1.0;
    };

    LocalFit best;
    std::size_t starts = 0;
    std::size_t converged = 0;
    for (double g : {0.15, 0.35, 0.5, 0.65, 0.85}) {
        for (double sb_mult : {0.0, 0.1, 0.5, 1.0, 3.0}) {
            const double s_b = sb_mult * mean_w / (1.0 - g);
            // log S_a that matches the mean price level at the mean allocation
            const double centre = std::log(mean_w / (1.0 - g) + s_b) - mean_ratio / (g - 1.0);
            for (double offset : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
                Eigen::VectorXd x(3);
                x << std::sqrt(sb_mult / (1.0 - g)) + (sb_mult == 0.0 ? 1e-3 : 0.0), centre + offset, gamma_to(g);
                auto local = minimize(fn, static_cast<int>(rows.size()), x);
                ++starts;
                if (local.converged) ++converged;
                if (local.cost < best.cost) best = local;
            }
        }
    }
    if (!std::isfinite(best.cost) || converged == 0) throw FitError("fit_market_aggregates: no start converged");

    auto out = unpack(best.x);
    std::vector<double> residuals(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) residuals[k] = out.model_price(water[k], rows[k].crop_price) / goal[k] - 1.0;
    out.diagnostics = diagnose(residuals, starts, converged);
    return out;
}

TableReport reproduce_table(const MarketAggregateFit& fit, std::span<const MarketRow> rows) {
    TableReport report;
    double sq_actual = 0.0;
    double sq_published = 0.0;
    bool all_published = !rows.empty();
    for (const auto& r : rows) {
        TableLine line;
        line.month = r.month;
        line.water_gl = r.water_gl;
        line.actual_price = r.actual_price;
        line.crop_price = r.crop_price;
        line.model_price = fit.model_price(r.water_gl * kMegalitresPerGigalitre, r.crop_price);
        line.residual = std::abs(line.model_price - r.actual_price) / r.actual_price;
        line.published_model_price = r.model_price;
        line.published_residual = r.residual;
        if (line.residual < 0.10) ++report.months_below_10pct;
        sq_actual += line.residual * line.residual;
        if (r.model_price) {
            const double e = line.model_price / *r.model_price - 1.0;
            sq_published += e * e;
        } else {
            all_published = false;
        }
        report.lines.push_back(std::move(line));
    }
    const auto n = static_cast<double>(rows.size());
    if (!rows.empty()) report.rms_vs_actual = std::sqrt(sq_actual / n);
    if (all_published) report.rms_vs_published = std::sqrt(sq_published / n);
    return report;
}

std::vector<MarketRow> murray_2015_16() {
    return {
        {"JUL", 37.0, 260.0, 280.0, 262.6, 0.01}, {"AUG", 54.3, 200.0, 260.0, 210.4, 0.05},
        {"SEP", 75.4, 200.0, 290.0, 206.9, 0.03}, {"OCT", 34.2, 245.0, 270.0, 261.1, 0.07},
        {"NOV", 46.3, 280.0, 300.0, 258.0, 0.08}, {"DEC", 76.6, 270.0, 285.0, 202.1, 0.25},
        {"JAN", 40.4, 255.0, 280.0, 253.8, 0.00}, {"FEB", 62.5, 210.0, 270.0, 207.0, 0.01},
        {"MAR", 78.9, 230.0, 265.0, 185.8, 0.19}, {"APR", 64.3, 225.0, 275.0, 208.5, 0.07},
        {"MAY", 51.2, 245.0, 285.0, 235.8, 0.04}, {"JUN", 59.6, 185.0, 250.0, 195.2, 0.05},
    };
}

}  // namespace watermarket
