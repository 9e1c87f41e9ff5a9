#pragma once

// Generators and independent oracles shared by the unit, property and
// acceptance tests. Oracles here never call the library routine they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "watermarket/common_pool.hpp"
#include "watermarket/market_core.hpp"
#include "watermarket/pairwise.hpp"
#include "watermarket/random.hpp"

namespace wmtest {

using namespace watermarket;

struct Ranges {
    double a_lo = 0.1, a_hi = 5.0;
    double b_lo = 0.0, b_hi = 2.0;
    double w_lo = 0.0, w_hi = 100.0;
};

inline MarketConfig random_config(Rng& rng, double gamma_lo = 0.1, double gamma_hi = 0.9) {
    MarketConfig cfg;
    cfg.gamma = rng.uniform(gamma_lo, gamma_hi);
    cfg.lambda = rng.uniform(0.0, 0.1);
    cfg.T = rng.uniform(0.2, 1.2);
    cfg.crop_price = rng.uniform(50.0, 500.0);
    return cfg;
}

inline std::vector<Participant> random_population(Rng& rng, std::size_t n, const Ranges& r = {}) {
    std::vector<Participant> ps(n);
    do {
        for (std::size_t i = 0; i < n; ++i) {
            ps[i].id = static_cast<ParticipantId>(i + 1);
            ps[i].a = rng.uniform(r.a_lo, r.a_hi);
            ps[i].b = rng.uniform(r.b_lo, r.b_hi);
            ps[i].w = rng.uniform(r.w_lo, r.w_hi);
        }
    } while (!(total_endowment(ps) > 0.0));
    return ps;
}

// Scalar bisection on a decreasing function; test-side root finder.
inline double bisect_decreasing(const std::function<double(double)>& f, double lo, double hi) {
    while (f(lo) < 0.0) lo /= 2.0;
    while (f(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Agricultural demand at price q straight from the first-order condition,
// clamped at zero. Written out here rather than taken from the library.
inline double oracle_demand(double q, const Participant& p, const MarketConfig& cfg) {
    const double m = q * std::exp(cfg.lambda * cfg.T);
    const double base = std::pow(m / (p.a * cfg.crop_price), 1.0 / (cfg.gamma - 1.0));
    return std::max(0.0, (base - p.b) * (1.0 - cfg.gamma) / p.a);
}

inline double oracle_clearing_price(std::span<const Participant> ps, const MarketConfig& cfg) {
    const double W = total_endowment(ps);
    auto excess = [&](double q) {
        double s = -W;
        for (const auto& p : ps) s += oracle_demand(q, p, cfg);
        return s;
    };
    return bisect_decreasing(excess, 1e-6, 1e6);
}

inline double oracle_yield(double w_ag, const Participant& p, const MarketConfig& cfg) {
    const double g = cfg.gamma;
    return (1.0 - g) / g * std::pow(p.a * w_ag / (1.0 - g) + p.b, g);
}

// Composite Simpson rule; n even.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 20000) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int k = 1; k < n; ++k) s += f(lo + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Population whose clearing leaves nobody clamped. Redraws b for anyone
// clamped; b = 0 participants are never clamped, so this terminates.
inline std::vector<Participant> random_interior_population(Rng& rng, std::size_t n, const MarketConfig& cfg,
                                                           const Ranges& r = {}) {
    auto ps = random_population(rng, n, r);
    for (int pass = 0; pass < 64; ++pass) {
        const auto res = clear_market(ps, cfg);
        if (res.clamped_count() == 0) return ps;
        for (std::size_t i = 0; i < n; ++i)
            if (res.allocations[i].clamped) ps[i].b *= rng.uniform(0.0, 0.5);
    }
    for (auto& p : ps) p.b = 0.0;
    return ps;
}

inline double relative_error(double x, double ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1e-300); }

// Brute-force stability: a (proposer, acceptor) pair blocks when both rank
// each other above their assignment (unmatched ranks below every listed partner).
inline std::size_t count_blocking(const PreferenceProfile& prefs,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    const std::size_t np = prefs.proposer_prefs.size();
    const std::size_t na = prefs.acceptor_prefs.size();
    std::vector<std::ptrdiff_t> partner_of_p(np, -1), partner_of_a(na, -1);
    for (auto [p, a] : pairs) {
        partner_of_p[p] = static_cast<std::ptrdiff_t>(a);
        partner_of_a[a] = static_cast<std::ptrdiff_t>(p);
    }
    auto rank = [](const std::vector<std::size_t>& list, std::ptrdiff_t who) -> std::size_t {
        if (who < 0) return std::numeric_limits<std::size_t>::max();
        auto it = std::find(list.begin(), list.end(), static_cast<std::size_t>(who));
        return it == list.end() ? std::numeric_limits<std::size_t>::max() - 1 : static_cast<std::size_t>(it - list.begin());
    };
    std::size_t blocking = 0;
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t a = 0; a < na; ++a) {
            if (partner_of_p[p] == static_cast<std::ptrdiff_t>(a)) continue;
            const auto& lp = prefs.proposer_prefs[p];
            const auto& la = prefs.acceptor_prefs[a];
            if (std::find(lp.begin(), lp.end(), a) == lp.end()) continue;
            if (std::find(la.begin(), la.end(), p) == la.end()) continue;
            const bool p_wants = rank(lp, static_cast<std::ptrdiff_t>(a)) < rank(lp, partner_of_p[p]);
            const bool a_wants = rank(la, static_cast<std::ptrdiff_t>(p)) < rank(la, partner_of_a[a]);
            if (p_wants && a_wants) ++blocking;
        }
    }
    return blocking;
}

inline PreferenceProfile random_profile(Rng& rng, std::size_t n) {
    PreferenceProfile prefs;
    prefs.proposer_prefs.assign(n, std::vector<std::size_t>(n));
    prefs.acceptor_prefs.assign(n, std::vector<std::size_t>(n));
    for (auto* side : {&prefs.proposer_prefs, &prefs.acceptor_prefs}) {
        for (auto& list : *side) {
            std::iota(list.begin(), list.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(list));
        }
    }
    return prefs;
}

// Proposers 0..n-2 cycle through acceptors 0..n-2 (offset by their index)
// and list n-1 last; proposer n-1 lists acceptors in order. Each acceptor
// prefers later arrivals, so every proposal displaces the holder and
// synchronized deferred acceptance runs for exactly n^2 - 2n + 2 rounds.
inline PreferenceProfile adversarial_profile(std::size_t n) {
    PreferenceProfile prefs;
    prefs.proposer_prefs.resize(n);
    if (n == 1) {
        prefs.proposer_prefs[0] = {0};
        prefs.acceptor_prefs = {{0}};
        return prefs;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t k = 0; k + 1 < n; ++k) prefs.proposer_prefs[i].push_back((i + k) % (n - 1));
        prefs.proposer_prefs[i].push_back(n - 1);
    }
    for (std::size_t k = 0; k < n; ++k) prefs.proposer_prefs[n - 1].push_back(k);

    // Replay synchronized rounds where the newest proposer always wins, and
    // record arrival order at each acceptor.
    std::vector<std::vector<std::size_t>> arrivals(n);
    std::vector<std::size_t> next(n, 0);
    std::vector<std::ptrdiff_t> holder(n, -1);
    std::vector<bool> free(n, true);
    for (bool any = true; any;) {
        any = false;
        std::vector<std::vector<std::size_t>> incoming(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!free[i] || next[i] >= n) continue;
            incoming[prefs.proposer_prefs[i][next[i]++]].push_back(i);
            any = true;
        }
        for (std::size_t a = 0; a < n; ++a) {
            for (auto i : incoming[a]) {
                arrivals[a].push_back(i);
                if (holder[a] >= 0) free[static_cast<std::size_t>(holder[a])] = true;
                holder[a] = static_cast<std::ptrdiff_t>(i);
                free[i] = false;
            }
        }
    }
    prefs.acceptor_prefs.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        auto& list = prefs.acceptor_prefs[a];
        for (auto it = arrivals[a].rbegin(); it != arrivals[a].rend(); ++it)
            if (std::find(list.begin(), list.end(), *it) == list.end()) list.push_back(*it);
        for (std::size_t i = 0; i < n; ++i)
            if (std::find(list.begin(), list.end(), i) == list.end()) list.push_back(i);
    }
    return prefs;
}

}  // namespace wmtest
