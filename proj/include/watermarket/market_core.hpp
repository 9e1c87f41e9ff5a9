#pragma once

// Participants, market constants and the HARA utility algebra shared by the
// clearing, pair-wise and calibration code.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace watermarket {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value left the domain of a utility formula (negative HARA base, q <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

using ParticipantId = std::int64_t;

/// One irrigator: water-use efficiency a, non-water intercept b, endowment w (ML).
struct Participant {
    ParticipantId id = 0;
    double a = 1.0;
    double b = 0.0;
    double w = 0.0;
};

/// Constants shared by every participant in one drainage basin.
struct MarketConfig {
    double gamma = 0.5;       // HARA curvature, in (0, 1)
    double lambda = 0.06;     // risk-free rate per year
    double T = 0.5;           // growing period, years
    double crop_price = 1.0;  // $ per yield unit
};

/// Split of a participant's endowment. w_tr > 0 sells, w_tr < 0 buys.
struct Allocation {
    double w_ag = 0.0;
    double w_tr = 0.0;
    bool clamped = false;  // w_ag pinned at 0 by the nonnegativity constraint
};

struct ValidationReport {
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

[[nodiscard]] ValidationReport validate(const MarketConfig& cfg);
[[nodiscard]] ValidationReport validate(const Participant& p, const MarketConfig& cfg);

/// e^{lambda T}: forward compounding applied to trade proceeds.
[[nodiscard]] double growth_factor(const MarketConfig& cfg) noexcept;

/// a*w_ag/(1-gamma) + b, the base raised to gamma in the yield curve.
[[nodiscard]] double hara_argument(double w_ag, const Participant& p, const MarketConfig& cfg) noexcept;

/// ((1-gamma)/gamma) * base^gamma. Throws DomainError for a negative base.
[[nodiscard]] double crop_yield(double w_ag, const Participant& p, const MarketConfig& cfg);

/// crop_yield * crop_price.
[[nodiscard]] double agricultural_utility(double w_ag, const Participant& p, const MarketConfig& cfg);

/// U_ag(w_ag + delta) - U_ag(w_ag) without the cancellation of subtracting two
/// large utilities. Both end points must be in the domain.
[[nodiscard]] double agricultural_utility_change(double w_ag, double delta, const Participant& p,
                                                 const MarketConfig& cfg);

/// w_tr * q * e^{lambda T}; applied to both signs of w_tr.
[[nodiscard]] double trading_utility(double w_tr, double q, const MarketConfig& cfg) noexcept;

[[nodiscard]] double total_utility(const Allocation& alloc, double q, const Participant& p,
                                   const MarketConfig& cfg);

/// dU_ag/dw_ag = a * base^{gamma-1} * crop_price. Singular at base = 0, so a
/// non-positive base throws DomainError.
[[nodiscard]] double marginal_agricultural_utility(double w_ag, const Participant& p,
                                                   const MarketConfig& cfg);

/// Marginal at the endowment, +inf when the base is zero (b = 0 and w = 0).
[[nodiscard]] double autarky_marginal(const Participant& p, const MarketConfig& cfg);

[[nodiscard]] double total_endowment(std::span<const Participant> ps) noexcept;

}  // namespace watermarket
