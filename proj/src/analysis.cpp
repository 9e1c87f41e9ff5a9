#include "watermarket/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "watermarket/random.hpp"

namespace watermarket {

double total_welfare(std::span<const Allocation> allocs, double q, std::span<const Participant> ps,
                     const MarketConfig& cfg) {
    if (allocs.size() != ps.size()) throw DomainError("total_welfare: allocation count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) total += total_utility(allocs[i], q, ps[i], cfg);
    return total;
}

double total_welfare(std::span<const Allocation> allocs, std::span<const double> prices,
                     std::span<const Participant> ps, const MarketConfig& cfg) {
    if (allocs.size() != ps.size() || prices.size() != ps.size())
        throw DomainError("total_welfare: allocation count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) total += total_utility(allocs[i], prices[i], ps[i], cfg);
    return total;
}

WelfareReport welfare_gap(std::span<const Participant> ps, const MarketConfig& cfg, PairingStrategy strategy,
                          std::uint64_t seed) {
    const auto pool = clear_market(ps, cfg);
    const auto pairwise = pairwise_market(ps, strategy, cfg, seed);

    WelfareReport report;
    report.strategy = strategy;
    report.seed = seed;
    report.u_common = total_welfare(pool.allocations, pool.q, ps, cfg);
    report.u_pairwise = pairwise.total_welfare;
    report.gap = report.u_common - report.u_pairwise;
    report.scale = std::abs(report.u_common);
    report.per_agent.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        report.per_agent.emplace_back(total_utility(pool.allocations[i], pool.q, ps[i], cfg),
                                      total_utility(pairwise.allocations[i], pairwise.prices[i], ps[i], cfg));
    }
    return report;
}

PairingComparison compare_all_pairings(std::span<const Participant> ps, const MarketConfig& cfg) {
    const auto pool = clear_market(ps, cfg);
    PairingComparison cmp;
    cmp.u_common = total_welfare(pool.allocations, pool.q, ps, cfg);
    cmp.scale = std::abs(cmp.u_common);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& pairing : enumerate_perfect_pairings(ps.size())) {
        const double u = execute_pairing(ps, pairing, cfg, PairingStrategy::random).total_welfare;
        cmp.pairing_welfare.push_back(u);
        best = std::max(best, u);
    }
    cmp.min_margin = cmp.u_common - best;
    return cmp;
}

double pareto_f(const ClearingResult& res, std::size_t to, std::size_t from, double d,
                std::span<const Participant> ps, const MarketConfig& cfg) {
    if (to >= ps.size() || from >= ps.size() || to == from || res.allocations.size() != ps.size())
        throw DomainError("pareto_f: invalid participant pair");
    const double giver = res.allocations[from].w_ag;
    if (!(d >= 0.0) || d > giver) {
        std::ostringstream os;
        os << "pareto_f: transfer " << d << " outside [0, " << giver << "]";
        throw DomainError(os.str());
    }
    // The payment d*q*e^{lambda T} leaves one side and reaches the other.
    return agricultural_utility_change(res.allocations[to].w_ag, d, ps[to], cfg) +
           agricultural_utility_change(giver, -d, ps[from], cfg);
}

ParetoScan pareto_scan(const ClearingResult& res, std::span<const Participant> ps, const MarketConfig& cfg,
                       std::size_t n_samples, std::uint64_t seed) {
    constexpr std::size_t kExhaustiveLimit = 20;
    constexpr int kLogGrid = 20;
    constexpr int kUniformGrid = 20;

    ParetoScan scan;
    scan.scale = std::abs(total_welfare(res.allocations, res.q, ps, cfg));
    scan.max_f = -std::numeric_limits<double>::infinity();
    scan.max_second_difference = -std::numeric_limits<double>::infinity();
    const std::size_t n = ps.size();
    if (n < 2) {
        scan.max_f = 0.0;
        scan.passed = true;
        return scan;
    }

    double w_min = std::numeric_limits<double>::infinity();
    for (const auto& p : ps)
        if (p.w > 0.0) w_min = std::min(w_min, p.w);

    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (n <= kExhaustiveLimit) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) pairs.emplace_back(i, j);
    } else {
        for (std::size_t k = 0; k < std::max<std::size_t>(n_samples, n); ++k) {
            const auto i = static_cast<std::size_t>(rng.index(n));
            auto j = static_cast<std::size_t>(rng.index(n - 1));
            if (j >= i) ++j;
            pairs.emplace_back(i, j);
        }
    }

    auto record = [&](std::size_t to, std::size_t from, double d) {
        const double f = pareto_f(res, to, from, d, ps, cfg);
        scan.samples.push_back({to, from, d, f});
        scan.max_f = std::max(scan.max_f, f);
        return f;
    };

    // Distance from w_ag to the pole of the marginal, in water units. A step
    // wider than this samples the singular region rather than the slope.
    auto smooth_scale = [&](std::size_t i) {
        return res.allocations[i].w_ag + ps[i].b * (1.0 - cfg.gamma) / ps[i].a;
    };
    for (auto [to, from] : pairs) {
        if (pareto_f(res, to, from, 0.0, ps, cfg) != 0.0) scan.f_zero_at_origin = false;
        const double d_max = res.allocations[from].w_ag;
        const double h = kParetoSlopeStep * std::min({1.0, smooth_scale(to), smooth_scale(from)});
        if (!(h > 0.0) || d_max < h) continue;  // the giver has nothing to give

        SlopeAtZero slope{to, from, 0.0, res.allocations[to].clamped};
        const double forward = pareto_f(res, to, from, h, ps, cfg);
        if (res.allocations[to].w_ag >= h) {
            slope.slope = (forward - pareto_f(res, from, to, h, ps, cfg)) / (2.0 * h);
        } else {
            slope.slope = forward / h;
        }
        scan.fprime_at_zero.push_back(slope);

        const double d_lo = 1e-6 * w_min;
        if (d_max > d_lo) {
            const double ratio = std::log(d_max / d_lo) / (kLogGrid - 1);
            for (int k = 0; k < kLogGrid; ++k) record(to, from, std::min(d_max, d_lo * std::exp(ratio * k)));

            std::vector<double> f(kUniformGrid + 1, 0.0);
            for (int k = 1; k <= kUniformGrid; ++k)
                f[k] = pareto_f(res, to, from, std::min(d_max, d_max * k / kUniformGrid), ps, cfg);
            for (int k = 1; k < kUniformGrid; ++k)
                scan.max_second_difference = std::max(scan.max_second_difference, f[k + 1] - 2.0 * f[k] + f[k - 1]);
        }
    }

    for (std::size_t k = 0; k < n_samples; ++k) {
        const auto [to, from] = pairs[static_cast<std::size_t>(rng.index(pairs.size()))];
        const double d_max = res.allocations[from].w_ag;
        if (d_max <= 0.0) continue;
        record(to, from, d_max * (1.0 - rng.uniform()));  // (0, d_max]
    }

    if (scan.samples.empty()) scan.max_f = 0.0;
    const double slope_tol = kParetoSlopeTolerance * scan.scale;
    bool slopes_ok = true;
    for (const auto& s : scan.fprime_at_zero) {
        scan.max_abs_fprime = std::max(scan.max_abs_fprime, std::abs(s.slope));
        slopes_ok = slopes_ok && (s.one_sided ? s.slope <= slope_tol : std::abs(s.slope) <= slope_tol);
    }
    const bool concave = scan.max_second_difference < 0.0 ||
                         scan.max_second_difference == -std::numeric_limits<double>::infinity();
    scan.passed = scan.f_zero_at_origin && scan.max_f <= kParetoValueTolerance * scan.scale && slopes_ok && concave;
    return scan;
}

ClearingResult mispriced_allocation(const ClearingResult& res, std::span<const Participant> ps,
                                    const MarketConfig& cfg, double factor) {
    ClearingResult out = res;
    for (std::size_t i = 0; i < ps.size(); i += 2) out.allocations[i] = individual_optimum(res.q * factor, ps[i], cfg);
    return out;
}

VerificationReport nash_deviation_test(const ClearingResult& res, std::span<const Participant> ps,
                                       const MarketConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
    constexpr int kGrid = 100;
    VerificationReport report;
    const double scale = std::abs(total_welfare(res.allocations, res.q, ps, cfg));
    const double m = res.q * growth_factor(cfg);
    const double tol = kNashTolerance * scale;
    Rng rng(seed);

    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps[i];
        const double w_ag = res.allocations[i].w_ag;
        if (p.w == 0.0) {
            report.add("nash", p.id, 0.0, tol);
            continue;
        }
        const double alpha_eq = w_ag / p.w;
        const double alpha_max = std::max(2.0, 2.0 * alpha_eq);

        // Utility change of moving from the equilibrium split to alpha' * w.
        auto delta = [&](double alpha) {
            const double target = alpha * p.w;
            return agricultural_utility_change(w_ag, target - w_ag, p, cfg) + (w_ag - target) * m;
        };
        double worst = delta(alpha_eq);
        for (int k = 0; k <= kGrid; ++k) worst = std::max(worst, delta(alpha_max * k / kGrid));
        for (std::size_t k = 0; k < n_samples; ++k) worst = std::max(worst, delta(rng.uniform(0.0, alpha_max)));
        report.add("nash", p.id, std::max(0.0, worst), tol);
    }
    return report;
}

}  // namespace watermarket
