#pragma once

// Welfare aggregation and numerical checks of the efficiency claims for the
// common pool: welfare dominance over pair-wise trading, Pareto optimality
// of the equilibrium, and the Nash property of individual optima.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "watermarket/common_pool.hpp"
#include "watermarket/pairwise.hpp"
#include "watermarket/verification.hpp"

namespace watermarket {

/// Sum of every participant's total utility at one common price.
[[nodiscard]] double total_welfare(std::span<const Allocation> allocs, double q,
                                   std::span<const Participant> ps, const MarketConfig& cfg);

/// Same, with a price per participant (pair-wise deals clear at different prices).
[[nodiscard]] double total_welfare(std::span<const Allocation> allocs, std::span<const double> prices,
                                   std::span<const Participant> ps, const MarketConfig& cfg);

struct WelfareReport {
    double u_common = 0.0;
    double u_pairwise = 0.0;
    double gap = 0.0;    // u_common - u_pairwise
    double scale = 0.0;  // |u_common|, the unit for relative tolerances
    std::vector<std::pair<double, double>> per_agent;  // (common, pairwise) utility
    PairingStrategy strategy = PairingStrategy::random;
    std::uint64_t seed = 0;

    [[nodiscard]] bool common_pool_dominates(double rel_tol = 1e-9) const noexcept {
        return gap >= -rel_tol * scale;
    }
};

[[nodiscard]] WelfareReport welfare_gap(std::span<const Participant> ps, const MarketConfig& cfg,
                                        PairingStrategy strategy, std::uint64_t seed);

/// Common-pool welfare against every perfect pairing of an even population.
struct PairingComparison {
    double u_common = 0.0;
    std::vector<double> pairing_welfare;  // in enumerate_perfect_pairings order
    double min_margin = 0.0;              // u_common - max(pairing_welfare)
    double scale = 0.0;
};

[[nodiscard]] PairingComparison compare_all_pairings(std::span<const Participant> ps, const MarketConfig& cfg);

/// Joint utility change when participant `to` receives d more agricultural
/// water from participant `from`, paying d*q. Indices are population
/// positions. The transfer terms cancel, so f depends only on the yields.
/// Throws DomainError when d < 0 or d exceeds the giver's w_ag.
[[nodiscard]] double pareto_f(const ClearingResult& res, std::size_t to, std::size_t from, double d,
                              std::span<const Participant> ps, const MarketConfig& cfg);

struct ParetoSample {
    std::size_t to = 0;
    std::size_t from = 0;
    double d = 0.0;
    double f = 0.0;
};

struct SlopeAtZero {
    std::size_t to = 0;
    std::size_t from = 0;
    double slope = 0.0;
    bool one_sided = false;  // receiver sits at w_ag = 0: only slope <= tol is required
};

struct ParetoScan {
    std::vector<ParetoSample> samples;
    std::vector<SlopeAtZero> fprime_at_zero;
    double max_f = 0.0;
    double max_abs_fprime = 0.0;
    double max_second_difference = 0.0;  // over uniform sub-grids; must stay < 0
    bool f_zero_at_origin = true;
    double scale = 0.0;
    bool passed = false;
};

inline constexpr double kParetoValueTolerance = 1e-9;  // on f, relative to scale
inline constexpr double kParetoSlopeTolerance = 1e-6;  // on f'(0), relative to scale
inline constexpr double kParetoSlopeStep = 1e-7;

[[nodiscard]] ParetoScan pareto_scan(const ClearingResult& res, std::span<const Participant> ps,
                                     const MarketConfig& cfg, std::size_t n_samples, std::uint64_t seed);

/// Negative control: participants at even positions re-optimize at q*factor,
/// the rest keep their equilibrium split. Marginals no longer agree.
[[nodiscard]] ClearingResult mispriced_allocation(const ClearingResult& res, std::span<const Participant> ps,
                                                  const MarketConfig& cfg, double factor = 1.1);

/// Samples unilateral deviations alpha' = w_ag'/w at the fixed equilibrium
/// price; one check per participant holding the largest utility improvement.
[[nodiscard]] VerificationReport nash_deviation_test(const ClearingResult& res, std::span<const Participant> ps,
                                                     const MarketConfig& cfg, std::size_t n_samples,
                                                     std::uint64_t seed);

inline constexpr double kNashTolerance = 1e-9;  // relative to scale

}  // namespace watermarket
