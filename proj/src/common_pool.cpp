#include "watermarket/common_pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "watermarket/kernels.hpp"

namespace watermarket {

namespace {

void require_population(std::span<const Participant> ps, const MarketConfig& cfg) {
    if (ps.empty()) throw DomainError("empty population");
    for (const auto& p : ps) {
        const auto report = validate(p, cfg);
        if (!report.ok()) {
            std::ostringstream os;
            os << "participant " << p.id << " violates " << report.violations.front();
            throw DomainError(os.str());
        }
    }
    if (!(total_endowment(ps) > 0.0)) throw DomainError("total endowment W must be positive");
}

// Interior price for the participants flagged active, who together absorb all of W.
double closed_form_price(std::span<const Participant> ps, const std::vector<bool>& active, double W,
                         const MarketConfig& cfg, DenominatorExponent exponent) {
    const double g = cfg.gamma;
    const double e = exponent == DenominatorExponent::derived ? g / (g - 1.0) : 1.0 / (g - 1.0);
    double sum_b = 0.0;
    double sum_a = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!active[i]) continue;
        sum_b += ps[i].b / ps[i].a;
        sum_a += std::pow(1.0 / ps[i].a, e);
    }
    const double ratio = (W / (1.0 - g) + sum_b) / sum_a;
    return std::pow(ratio, g - 1.0) * cfg.crop_price / growth_factor(cfg);
}

}  // namespace

std::size_t ClearingResult::clamped_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(allocations.begin(), allocations.end(), [](const Allocation& a) { return a.clamped; }));
}

double unconstrained_demand(double m, const Participant& p, const MarketConfig& cfg) {
    const double base = std::pow(m / (p.a * cfg.crop_price), 1.0 / (cfg.gamma - 1.0));
    return (base - p.b) * (1.0 - cfg.gamma) / p.a;
}

Allocation individual_optimum(double q, const Participant& p, const MarketConfig& cfg) {
    if (!(q > 0.0) || !std::isfinite(q)) {
        std::ostringstream os;
        os << "individual_optimum: price " << q << " must be positive and finite";
        throw DomainError(os.str());
    }
    const double w_ag = unconstrained_demand(q * growth_factor(cfg), p, cfg);
    if (w_ag < 0.0) return {0.0, p.w, true};
    return {w_ag, p.w - w_ag, false};
}

double excess_demand(double q, std::span<const Participant> ps, const MarketConfig& cfg) {
    return kernels::excess_demand(q, ps, cfg);
}

double clearing_price_numeric(std::span<const Participant> ps, const MarketConfig& cfg) {
    require_population(ps, cfg);
    const double growth = growth_factor(cfg);

    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& p : ps) {
        const double q = autarky_marginal(p, cfg) / growth;
        if (!std::isfinite(q)) continue;
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    if (!std::isfinite(lo)) throw BracketError("no participant has a finite autarky marginal");

    constexpr int kMaxExpansions = 60;
    double e_lo = excess_demand(lo, ps, cfg);
    for (int k = 0; e_lo < 0.0; ++k) {
        if (k == kMaxExpansions) throw BracketError("excess demand negative at every lower bound tried");
        lo *= 0.5;
        e_lo = excess_demand(lo, ps, cfg);
    }
    double e_hi = excess_demand(hi, ps, cfg);
    for (int k = 0; e_hi > 0.0; ++k) {
        if (k == kMaxExpansions) throw BracketError("excess demand positive at every upper bound tried");
        hi *= 2.0;
        e_hi = excess_demand(hi, ps, cfg);
    }
    if (e_lo == 0.0) return lo;
    if (e_hi == 0.0) return hi;

    // Bisect until the bracket cannot shrink any further in double precision.
    for (int iter = 0; iter < 4096; ++iter) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        const double e_mid = excess_demand(mid, ps, cfg);
        if (e_mid == 0.0) return mid;
        if (e_mid > 0.0) {
            lo = mid;
            e_lo = e_mid;
        } else {
            hi = mid;
            e_hi = e_mid;
        }
    }
    return std::abs(e_lo) <= std::abs(e_hi) ? lo : hi;
}

double clearing_price_closed_form(std::span<const Participant> ps, const MarketConfig& cfg,
                                  DenominatorExponent exponent) {
    require_population(ps, cfg);
    return closed_form_price(ps, std::vector<bool>(ps.size(), true), total_endowment(ps), cfg, exponent);
}

bool is_interior(double q, std::span<const Participant> ps, const MarketConfig& cfg) {
    const double m = q * growth_factor(cfg);
    return std::all_of(ps.begin(), ps.end(),
                       [&](const Participant& p) { return unconstrained_demand(m, p, cfg) >= 0.0; });
}

ClearingResult clear_market(std::span<const Participant> ps, const MarketConfig& cfg, ClearingMethod method) {
    require_population(ps, cfg);
    const double W = total_endowment(ps);
    const double growth = growth_factor(cfg);

    ClearingResult res;
    res.total_water = W;
    res.method = method;
    res.allocations.resize(ps.size());

    if (method == ClearingMethod::numeric) {
        res.q = clearing_price_numeric(ps, cfg);
        res.m = res.q * growth;
        res.passes = 1;
        for (std::size_t i = 0; i < ps.size(); ++i) res.allocations[i] = individual_optimum(res.q, ps[i], cfg);
        return res;
    }

    // Complementarity loop: the reduced-set price only rises as clamps are
    // added, so anyone clamped once stays clamped.
    std::vector<bool> active(ps.size(), true);
    for (;;) {
        ++res.passes;
        if (std::none_of(active.begin(), active.end(), [](bool b) { return b; }))
            throw Error("clear_market: every participant clamped");
        res.q = closed_form_price(ps, active, W, cfg, DenominatorExponent::derived);
        res.m = res.q * growth;
        bool changed = false;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (active[i] && unconstrained_demand(res.m, ps[i], cfg) < 0.0) {
                active[i] = false;
                changed = true;
            }
        }
        if (!changed) break;
    }

    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (active[i]) {
            const double w_ag = unconstrained_demand(res.m, ps[i], cfg);
            res.allocations[i] = {w_ag, ps[i].w - w_ag, false};
        } else {
            res.allocations[i] = {0.0, ps[i].w, true};
        }
    }
    return res;
}

VerificationReport verify_kkt(const ClearingResult& res, std::span<const Participant> ps,
                              const MarketConfig& cfg) {
    VerificationReport report;
    const double m = res.q * growth_factor(cfg);
    report.add("shadow_price", std::nullopt, std::abs(res.m - m) / m, 1e-12);
    if (res.allocations.size() != ps.size()) {
        report.add("allocation_count", std::nullopt, std::numeric_limits<double>::infinity(), 0.0);
        return report;
    }

    double traded = 0.0;
    double W = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps[i];
        const auto& a = res.allocations[i];
        traded += a.w_tr;
        W += p.w;

        const double magnitude = std::max({1.0, std::abs(p.w), std::abs(a.w_ag), std::abs(a.w_tr)});
        report.add("budget", p.id, std::abs(a.w_ag + a.w_tr - p.w), 1e-12 * magnitude);
        report.add("nonnegativity", p.id, std::max(0.0, -a.w_ag), 0.0);

        double marginal = std::numeric_limits<double>::infinity();
        try {
            marginal = marginal_agricultural_utility(a.w_ag, p, cfg);
        } catch (const DomainError&) {
        }
        if (a.clamped) {
            report.add("complementarity", p.id, std::max(0.0, marginal - m) / m, kStationarityTolerance);
            report.add("clamp_at_zero", p.id, std::abs(a.w_ag), 0.0);
        } else {
            report.add("stationarity", p.id, std::abs(marginal - m) / m, kStationarityTolerance);
        }
    }
    report.add("clearing", std::nullopt, std::abs(traded), kClearingTolerance * W);
    return report;
}

}  // namespace watermarket
