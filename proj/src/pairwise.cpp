#include "watermarket/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "watermarket/analysis.hpp"
#include "watermarket/kernels.hpp"
#include "watermarket/random.hpp"

namespace watermarket {

BilateralDeal bilateral_clear(const Participant& pi, const Participant& pj, const MarketConfig& cfg) {
    BilateralDeal deal;
    deal.i = pi.id;
    deal.j = pj.id;
    if (pi.w + pj.w == 0.0) {
        for (const auto* p : {&pi, &pj}) {
            const auto report = validate(*p, cfg);
            if (!report.ok()) throw DomainError("bilateral_clear: " + report.violations.front());
        }
        deal.alloc_i = {0.0, 0.0, false};
        deal.alloc_j = {0.0, 0.0, false};
        return deal;
    }
    const Participant pair[] = {pi, pj};
    const auto res = clear_market(pair, cfg);
    deal.q_tilde = res.q;
    deal.alloc_i = res.allocations[0];
    deal.alloc_j = res.allocations[1];
    return deal;
}

std::pair<double, double> deal_gains(const BilateralDeal& deal, const Participant& pi, const Participant& pj,
                                     const MarketConfig& cfg) {
    auto gain = [&](const Allocation& a, const Participant& p) {
        return agricultural_utility_change(p.w, a.w_ag - p.w, p, cfg) + trading_utility(a.w_tr, deal.q_tilde, cfg);
    };
    return {gain(deal.alloc_i, pi), gain(deal.alloc_j, pj)};
}

MarketPreferences build_preferences(std::span<const Participant> ps, const MarketConfig& cfg,
                                    ClassificationRule rule) {
    const std::size_t n = ps.size();
    std::vector<double> marginal_price(n);
    const double growth = growth_factor(cfg);
    for (std::size_t i = 0; i < n; ++i) marginal_price[i] = autarky_marginal(ps[i], cfg) / growth;

    double reference = 0.0;
    if (rule == ClassificationRule::common_pool_price) {
        reference = clear_market(ps, cfg).q;
    } else {
        auto sorted = marginal_price;
        std::sort(sorted.begin(), sorted.end());
        reference = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }

    MarketPreferences prefs;
    for (std::size_t i = 0; i < n; ++i) (marginal_price[i] > reference ? prefs.buyers : prefs.sellers).push_back(i);
    if (prefs.buyers.empty() || prefs.sellers.empty()) throw DegenerateError("build_preferences: one side of the market is empty");

    prefs.gains = kernels::gain_matrix(ps, cfg);

    auto rank = [&](std::size_t self, const std::vector<std::size_t>& others) {
        std::vector<std::size_t> order(others.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            const double gx = prefs.gains[self * n + others[x]];
            const double gy = prefs.gains[self * n + others[y]];
            if (gx != gy) return gx > gy;
            return ps[others[x]].id < ps[others[y]].id;
        });
        return order;
    };
    for (auto b : prefs.buyers) prefs.profile.proposer_prefs.push_back(rank(b, prefs.sellers));
    for (auto s : prefs.sellers) prefs.profile.acceptor_prefs.push_back(rank(s, prefs.buyers));
    return prefs;
}

namespace {

constexpr std::size_t kUnmatched = std::numeric_limits<std::size_t>::max();

// rank[a][p] = position of proposer p in acceptor a's list, kUnmatched if absent.
std::vector<std::vector<std::size_t>> acceptor_ranks(const PreferenceProfile& prefs) {
    const std::size_t proposers = prefs.proposer_prefs.size();
    std::vector<std::vector<std::size_t>> rank(prefs.acceptor_prefs.size(),
                                               std::vector<std::size_t>(proposers, kUnmatched));
    for (std::size_t a = 0; a < prefs.acceptor_prefs.size(); ++a)
        for (std::size_t r = 0; r < prefs.acceptor_prefs[a].size(); ++r) rank[a][prefs.acceptor_prefs[a][r]] = r;
    return rank;
}

}  // namespace

Matching deferred_acceptance(const PreferenceProfile& prefs) {
    const std::size_t proposers = prefs.proposer_prefs.size();
    const std::size_t acceptors = prefs.acceptor_prefs.size();
    const auto rank = acceptor_ranks(prefs);

    std::vector<std::size_t> next(proposers, 0);
    std::vector<std::size_t> partner(proposers, kUnmatched);
    std::vector<std::size_t> held(acceptors, kUnmatched);

    Matching result;
    std::vector<std::pair<std::size_t, std::size_t>> proposals;
    for (;;) {
        proposals.clear();
        for (std::size_t p = 0; p < proposers; ++p) {
            if (partner[p] == kUnmatched && next[p] < prefs.proposer_prefs[p].size())
                proposals.emplace_back(p, prefs.proposer_prefs[p][next[p]++]);
        }
        if (proposals.empty()) break;
        ++result.stages;
        for (auto [p, a] : proposals) {
            if (rank[a][p] == kUnmatched) continue;
            const std::size_t current = held[a];
            if (current != kUnmatched && rank[a][current] < rank[a][p]) continue;
            if (current != kUnmatched) partner[current] = kUnmatched;
            held[a] = p;
            partner[p] = a;
        }
    }

    for (std::size_t p = 0; p < proposers; ++p) {
        if (partner[p] == kUnmatched)
            result.unmatched_proposers.push_back(p);
        else
            result.pairs.emplace_back(p, partner[p]);
    }
    for (std::size_t a = 0; a < acceptors; ++a)
        if (held[a] == kUnmatched) result.unmatched_acceptors.push_back(a);
    return result;
}

std::vector<std::pair<std::size_t, std::size_t>> blocking_pairs(const PreferenceProfile& prefs,
                                                                const Matching& matching) {
    const auto rank = acceptor_ranks(prefs);
    std::vector<std::size_t> partner(prefs.proposer_prefs.size(), kUnmatched);
    std::vector<std::size_t> held(prefs.acceptor_prefs.size(), kUnmatched);
    for (auto [p, a] : matching.pairs) {
        partner[p] = a;
        held[a] = p;
    }

    std::vector<std::pair<std::size_t, std::size_t>> blocking;
    for (std::size_t p = 0; p < prefs.proposer_prefs.size(); ++p) {
        for (std::size_t a : prefs.proposer_prefs[p]) {
            if (a == partner[p]) break;  // everything after is worse for p
            if (rank[a][p] == kUnmatched) continue;
            if (held[a] == kUnmatched || rank[a][p] < rank[a][held[a]]) blocking.emplace_back(p, a);
        }
    }
    return blocking;
}

const char* to_string(PairingStrategy s) noexcept {
    switch (s) {
        case PairingStrategy::random: return "random";
        case PairingStrategy::greedy: return "greedy";
        case PairingStrategy::stable: return "stable";
    }
    return "unknown";
}

std::optional<PairingStrategy> parse_strategy(std::string_view name) noexcept {
    if (name == "random") return PairingStrategy::random;
    if (name == "greedy" || name == "greedy-surplus") return PairingStrategy::greedy;
    if (name == "stable") return PairingStrategy::stable;
    return std::nullopt;
}

PairwiseOutcome execute_pairing(std::span<const Participant> ps, const Pairing& pairing, const MarketConfig& cfg,
                                PairingStrategy tag) {
    const std::size_t n = ps.size();
    PairwiseOutcome out;
    out.strategy = tag;
    out.allocations.resize(n);
    out.prices.assign(n, 0.0);
    std::vector<bool> paired(n, false);
    for (std::size_t i = 0; i < n; ++i) out.allocations[i] = {ps[i].w, 0.0, false};

    for (auto [i, j] : pairing) {
        if (i >= n || j >= n || i == j || paired[i] || paired[j]) throw DomainError("execute_pairing: pairs must be disjoint");
        paired[i] = paired[j] = true;
        auto deal = bilateral_clear(ps[i], ps[j], cfg);
        out.allocations[i] = deal.alloc_i;
        out.allocations[j] = deal.alloc_j;
        out.prices[i] = out.prices[j] = deal.q_tilde;
        out.deals.push_back(std::move(deal));
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!paired[i]) out.unpaired.push_back(i);
    out.total_welfare = total_welfare(out.allocations, out.prices, ps, cfg);
    return out;
}

namespace {

Pairing random_pairing(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    Pairing pairing;
    for (std::size_t k = 0; k + 1 < n; k += 2) pairing.emplace_back(order[k], order[k + 1]);
    return pairing;
}

Pairing greedy_pairing(std::span<const Participant> ps, const MarketConfig& cfg) {
    const std::size_t n = ps.size();
    const auto gains = kernels::gain_matrix(ps, cfg);
    std::vector<bool> taken(n, false);
    Pairing pairing;
    for (std::size_t left = n; left >= 2; left -= 2) {
        double best = -std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> pick{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (taken[j]) continue;
                const double joint = gains[i * n + j] + gains[j * n + i];
                if (joint > best) {
                    best = joint;
                    pick = {i, j};
                }
            }
        }
        taken[pick.first] = taken[pick.second] = true;
        pairing.push_back(pick);
    }
    return pairing;
}

}  // namespace

PairwiseOutcome pairwise_market(std::span<const Participant> ps, PairingStrategy strategy, const MarketConfig& cfg,
                                std::uint64_t seed, ClassificationRule rule) {
    switch (strategy) {
        case PairingStrategy::random:
            return execute_pairing(ps, random_pairing(ps.size(), seed), cfg, strategy);
        case PairingStrategy::greedy:
            return execute_pairing(ps, greedy_pairing(ps, cfg), cfg, strategy);
        case PairingStrategy::stable: {
            Pairing pairing;
            std::size_t stages = 0;
            try {
                const auto prefs = build_preferences(ps, cfg, rule);
                const auto matching = deferred_acceptance(prefs.profile);
                stages = matching.stages;
                for (auto [b, s] : matching.pairs) pairing.emplace_back(prefs.buyers[b], prefs.sellers[s]);
            } catch (const DegenerateError&) {
                // Nobody on one side: everyone stays in autarky.
            }
            auto out = execute_pairing(ps, pairing, cfg, strategy);
            out.stages = stages;
            return out;
        }
    }
    throw DomainError("pairwise_market: unknown strategy");
}

std::vector<Pairing> enumerate_perfect_pairings(std::size_t n) {
    if (n % 2 != 0) throw DomainError("enumerate_perfect_pairings: n must be even");
    std::vector<Pairing> all;
    Pairing current;
    std::vector<bool> used(n, false);

    auto recurse = [&](auto&& self) -> void {
        std::size_t first = 0;
        while (first < n && used[first]) ++first;
        if (first == n) {
            all.push_back(current);
            return;
        }
        used[first] = true;
        for (std::size_t j = first + 1; j < n; ++j) {
            if (used[j]) continue;
            used[j] = true;
            current.emplace_back(first, j);
            self(self);
            current.pop_back();
            used[j] = false;
        }
        used[first] = false;
    };
    recurse(recurse);
    return all;
}

}  // namespace watermarket
