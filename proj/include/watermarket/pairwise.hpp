#pragma once

// Pair-wise trading: two participants clear privately at their own price,
// partners are found by a pairing strategy, and stable partnerships come
// from buyer-proposing deferred acceptance.

#include <cstdint>
#include <optional>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

#include "watermarket/common_pool.hpp"

namespace watermarket {

/// A one-sided market: no buyers or no sellers to match.
class DegenerateError : public Error {
public:
    using Error::Error;
};

struct BilateralDeal {
    ParticipantId i = 0;
    ParticipantId j = 0;
    double q_tilde = 0.0;  // two-party clearing price; 0 when neither holds water
    Allocation alloc_i;
    Allocation alloc_j;
};

/// Clears the two-participant market {pi, pj}.
[[nodiscard]] BilateralDeal bilateral_clear(const Participant& pi, const Participant& pj,
                                            const MarketConfig& cfg);

/// Utility gain over autarky for (pi, pj) at the deal.
[[nodiscard]] std::pair<double, double> deal_gains(const BilateralDeal& deal, const Participant& pi,
                                                   const Participant& pj, const MarketConfig& cfg);

/// Ranked lists for a two-sided matching problem; indices are local to each side.
struct PreferenceProfile {
    std::vector<std::vector<std::size_t>> proposer_prefs;  // best first
    std::vector<std::vector<std::size_t>> acceptor_prefs;  // best first
};

enum class ClassificationRule {
    common_pool_price,        // buyer iff autarky marginal price exceeds the common-pool q
    median_autarky_marginal,  // buyer iff it exceeds the median autarky marginal price
};

/// Buyers propose, sellers accept. buyers/sellers map local indices back to the population.
struct MarketPreferences {
    std::vector<std::size_t> buyers;
    std::vector<std::size_t> sellers;
    PreferenceProfile profile;
    std::vector<double> gains;  // n x n, see kernels::gain_matrix
};

[[nodiscard]] MarketPreferences build_preferences(std::span<const Participant> ps, const MarketConfig& cfg,
                                                  ClassificationRule rule = ClassificationRule::common_pool_price);

struct Matching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (proposer, acceptor), local indices
    std::vector<std::size_t> unmatched_proposers;
    std::vector<std::size_t> unmatched_acceptors;
    std::size_t stages = 0;  // synchronized proposal rounds
};

/// Buyer-proposing deferred acceptance. Incomplete lists are allowed; an
/// acceptor rejects anyone missing from its list.
[[nodiscard]] Matching deferred_acceptance(const PreferenceProfile& prefs);

/// Exhaustive scan for pairs who both prefer each other to their assignment.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> blocking_pairs(const PreferenceProfile& prefs,
                                                                              const Matching& matching);

/// n^2 - 2n + 2, the worst-case number of rounds for n per side.
[[nodiscard]] constexpr std::uint64_t stage_bound(std::uint64_t n) noexcept {
    return n == 0 ? 0 : n * n - 2 * n + 2;
}

enum class PairingStrategy { random, greedy, stable };

[[nodiscard]] const char* to_string(PairingStrategy s) noexcept;
[[nodiscard]] std::optional<PairingStrategy> parse_strategy(std::string_view name) noexcept;

/// Disjoint pairs of population indices.
using Pairing = std::vector<std::pair<std::size_t, std::size_t>>;

struct PairwiseOutcome {
    std::vector<BilateralDeal> deals;
    std::vector<Allocation> allocations;  // per participant, population order
    std::vector<double> prices;           // price each participant traded at; 0 in autarky
    std::vector<std::size_t> unpaired;    // left in autarky
    double total_welfare = 0.0;
    PairingStrategy strategy = PairingStrategy::random;
    std::optional<std::size_t> stages;    // stable strategy only
};

/// Runs one round of bilateral trading over an explicit pairing.
[[nodiscard]] PairwiseOutcome execute_pairing(std::span<const Participant> ps, const Pairing& pairing,
                                              const MarketConfig& cfg, PairingStrategy tag);

[[nodiscard]] PairwiseOutcome pairwise_market(std::span<const Participant> ps, PairingStrategy strategy,
                                              const MarketConfig& cfg, std::uint64_t seed,
                                              ClassificationRule rule = ClassificationRule::common_pool_price);

/// Every perfect pairing of {0..n-1}; (n-1)!! of them. n must be even.
[[nodiscard]] std::vector<Pairing> enumerate_perfect_pairings(std::size_t n);

}  // namespace watermarket
