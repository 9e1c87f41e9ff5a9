#include "watermarket/kernels.hpp"

#include <cstddef>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "watermarket/pairwise.hpp"

namespace watermarket::kernels {

namespace {

constexpr std::size_t kDemandThreshold = 4096;
constexpr std::size_t kGainThreshold = 16;
constexpr std::size_t kMarketThreshold = 4;

bool go_parallel(Execution exec, std::size_t size, std::size_t threshold) {
    if (exec == Execution::automatic) return size >= threshold && max_threads() > 1;
    return exec == Execution::parallel;
}

double clamped_demand(double m, const Participant& p, const MarketConfig& cfg) {
    const double w_ag = unconstrained_demand(m, p, cfg);
    return w_ag < 0.0 ? 0.0 : w_ag;
}

}  // namespace

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void agricultural_demands(double q, std::span<const Participant> ps, const MarketConfig& cfg,
                          std::span<double> out, Execution exec) {
    const double m = q * growth_factor(cfg);
    const auto n = static_cast<std::ptrdiff_t>(ps.size());
    if (go_parallel(exec, ps.size(), kDemandThreshold)) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = clamped_demand(m, ps[i], cfg);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = clamped_demand(m, ps[i], cfg);
    }
}

double excess_demand(double q, std::span<const Participant> ps, const MarketConfig& cfg, Execution exec) {
    if (!go_parallel(exec, ps.size(), kDemandThreshold)) {
        const double m = q * growth_factor(cfg);
        double total = 0.0;
        double W = 0.0;
        for (const auto& p : ps) {
            total += clamped_demand(m, p, cfg);
            W += p.w;
        }
        return total - W;
    }
    std::vector<double> demand(ps.size());
    agricultural_demands(q, ps, cfg, demand, Execution::parallel);
    double total = 0.0;
    double W = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        total += demand[i];
        W += ps[i].w;
    }
    return total - W;
}

std::vector<double> gain_matrix(std::span<const Participant> ps, const MarketConfig& cfg, Execution exec) {
    const std::size_t n = ps.size();
    std::vector<double> gains(n * n, 0.0);
    std::vector<std::exception_ptr> errors(n);

    auto row = [&](std::size_t i) {
        try {
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto deal = bilateral_clear(ps[i], ps[j], cfg);
                const auto g = deal_gains(deal, ps[i], ps[j], cfg);
                gains[i * n + j] = g.first;
                gains[j * n + i] = g.second;
            }
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const auto rows = static_cast<std::ptrdiff_t>(n);
    if (go_parallel(exec, n, kGainThreshold)) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < rows; ++i) row(static_cast<std::size_t>(i));
    } else {
        for (std::ptrdiff_t i = 0; i < rows; ++i) row(static_cast<std::size_t>(i));
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return gains;
}

std::vector<ClearingResult> clear_markets(std::span<const Market> markets, ClearingMethod method,
                                          Execution exec) {
    std::vector<ClearingResult> results(markets.size());
    std::vector<std::exception_ptr> errors(markets.size());
    const auto count = static_cast<std::ptrdiff_t>(markets.size());

    auto one = [&](std::ptrdiff_t k) {
        try {
            results[k] = clear_market(markets[k].participants, markets[k].config, method);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };

    if (go_parallel(exec, markets.size(), kMarketThreshold)) {
#pragma omp parallel for schedule(dynamic, 4)
        for (std::ptrdiff_t k = 0; k < count; ++k) one(k);
    } else {
        for (std::ptrdiff_t k = 0; k < count; ++k) one(k);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace watermarket::kernels
