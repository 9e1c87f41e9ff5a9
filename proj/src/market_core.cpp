#include "watermarket/market_core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace watermarket {

namespace {

void require_base(double base, const char* what) {
    if (!(base >= 0.0)) {
        std::ostringstream os;
        os << what << ": HARA argument " << base << " is negative";
        throw DomainError(os.str());
    }
}

double prefactor(const MarketConfig& cfg) { return (1.0 - cfg.gamma) / cfg.gamma; }

}  // namespace

ValidationReport validate(const MarketConfig& cfg) {
    ValidationReport r;
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) r.violations.emplace_back("gamma in (0,1)");
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) r.violations.emplace_back("lambda >= 0");
    if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) r.violations.emplace_back("T > 0");
    if (!(cfg.crop_price > 0.0) || !std::isfinite(cfg.crop_price))
        r.violations.emplace_back("crop_price > 0");
    return r;
}

ValidationReport validate(const Participant& p, const MarketConfig& cfg) {
    ValidationReport r = validate(cfg);
    if (!(p.a > 0.0) || !std::isfinite(p.a)) r.violations.emplace_back("a > 0");
    if (!(p.b >= 0.0) || !std::isfinite(p.b)) r.violations.emplace_back("b >= 0");
    if (!(p.w >= 0.0) || !std::isfinite(p.w)) r.violations.emplace_back("w >= 0");
    return r;
}

double growth_factor(const MarketConfig& cfg) noexcept { return std::exp(cfg.lambda * cfg.T); }

double hara_argument(double w_ag, const Participant& p, const MarketConfig& cfg) noexcept {
    return p.a * w_ag / (1.0 - cfg.gamma) + p.b;
}

double crop_yield(double w_ag, const Participant& p, const MarketConfig& cfg) {
    const double base = hara_argument(w_ag, p, cfg);
    require_base(base, "crop_yield");
    return prefactor(cfg) * std::pow(base, cfg.gamma);
}

double agricultural_utility(double w_ag, const Participant& p, const MarketConfig& cfg) {
    return crop_yield(w_ag, p, cfg) * cfg.crop_price;
}

double agricultural_utility_change(double w_ag, double delta, const Participant& p,
                                   const MarketConfig& cfg) {
    const double base = hara_argument(w_ag, p, cfg);
    const double moved = hara_argument(w_ag + delta, p, cfg);
    require_base(base, "agricultural_utility_change");
    require_base(moved, "agricultural_utility_change");
    if (delta == 0.0) return 0.0;
    const double scale = prefactor(cfg) * cfg.crop_price;
    if (base == 0.0) return scale * std::pow(moved, cfg.gamma);
    // base^g * ((1 + step/base)^g - 1)
    const double step = p.a * delta / (1.0 - cfg.gamma);
    return scale * std::pow(base, cfg.gamma) * std::expm1(cfg.gamma * std::log1p(step / base));
}

double trading_utility(double w_tr, double q, const MarketConfig& cfg) noexcept {
    return w_tr * q * growth_factor(cfg);
}

double total_utility(const Allocation& alloc, double q, const Participant& p,
                     const MarketConfig& cfg) {
    return agricultural_utility(alloc.w_ag, p, cfg) + trading_utility(alloc.w_tr, q, cfg);
}

double marginal_agricultural_utility(double w_ag, const Participant& p, const MarketConfig& cfg) {
    const double base = hara_argument(w_ag, p, cfg);
    if (!(base > 0.0)) {
        std::ostringstream os;
        os << "marginal_agricultural_utility: HARA argument " << base << " is not positive";
        throw DomainError(os.str());
    }
    return p.a * std::pow(base, cfg.gamma - 1.0) * cfg.crop_price;
}

double autarky_marginal(const Participant& p, const MarketConfig& cfg) {
    if (hara_argument(p.w, p, cfg) == 0.0) return std::numeric_limits<double>::infinity();
    return marginal_agricultural_utility(p.w, p, cfg);
}

double total_endowment(std::span<const Participant> ps) noexcept {
    double W = 0.0;
    for (const auto& p : ps) W += p.w;
    return W;
}

}  // namespace watermarket
