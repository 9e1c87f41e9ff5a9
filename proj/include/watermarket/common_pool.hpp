#pragma once

// Common-pool ("smart market") clearing: every participant trades with the
// pool manager at one price q chosen so that aggregate sales equal purchases.

#include <span>
#include <vector>

#include "watermarket/market_core.hpp"
#include "watermarket/verification.hpp"

namespace watermarket {

/// No sign change of the excess demand inside the search window.
class BracketError : public Error {
public:
    using Error::Error;
};

enum class ClearingMethod { closed_form, numeric };

/// Which exponent the closed-form denominator uses. `printed` reproduces the
/// historical 1/(gamma-1) form for comparison only; it does not clear markets.
enum class DenominatorExponent { derived, printed };

struct ClearingResult {
    double q = 0.0;             // equilibrium price, $/ML
    double m = 0.0;             // shadow price q * e^{lambda T}
    double total_water = 0.0;   // W
    std::vector<Allocation> allocations;
    ClearingMethod method = ClearingMethod::closed_form;
    int passes = 0;             // clamp-and-reclear passes

    [[nodiscard]] std::size_t clamped_count() const noexcept;
};

/// A population together with the constants it trades under.
struct Market {
    MarketConfig config;
    std::vector<Participant> participants;
};

/// Utility-maximizing split at price q. A negative agricultural demand is
/// clamped to zero and flagged.
[[nodiscard]] Allocation individual_optimum(double q, const Participant& p, const MarketConfig& cfg);

/// Unclamped agricultural demand at shadow price m; may be negative.
[[nodiscard]] double unconstrained_demand(double m, const Participant& p, const MarketConfig& cfg);

/// E(q) = sum_i w_ag,i(q) - W with clamped demands. Decreasing in q.
[[nodiscard]] double excess_demand(double q, std::span<const Participant> ps, const MarketConfig& cfg);

/// Bracket-and-bisect root of the excess demand.
[[nodiscard]] double clearing_price_numeric(std::span<const Participant> ps, const MarketConfig& cfg);

/// Closed-form interior clearing price. Meaningful only when nobody is
/// clamped at the returned price; clear_market handles the corner case.
[[nodiscard]] double clearing_price_closed_form(std::span<const Participant> ps, const MarketConfig& cfg,
                                                DenominatorExponent exponent = DenominatorExponent::derived);

/// True when every participant's unclamped demand at q is nonnegative.
[[nodiscard]] bool is_interior(double q, std::span<const Participant> ps, const MarketConfig& cfg);

[[nodiscard]] ClearingResult clear_market(std::span<const Participant> ps, const MarketConfig& cfg,
                                          ClearingMethod method = ClearingMethod::closed_form);

/// First-order conditions, budget identities and the clearing residual.
[[nodiscard]] VerificationReport verify_kkt(const ClearingResult& res, std::span<const Participant> ps,
                                            const MarketConfig& cfg);

inline constexpr double kStationarityTolerance = 1e-8;  // relative to m
inline constexpr double kClearingTolerance = 1e-9;      // relative to W
inline constexpr double kBisectionTolerance = 1e-10;    // relative to W

}  // namespace watermarket
