#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "watermarket/analysis.hpp"

using namespace watermarket;
using wmtest::relative_error;

namespace {

MarketConfig fixture_config() {
    MarketConfig cfg;
    cfg.gamma = 0.5;
    cfg.crop_price = 280.0;
    return cfg;
}

std::vector<Participant> fixture3() { return {{1, 0.5, 0.1, 10.0}, {2, 1.0, 0.2, 5.0}, {3, 2.0, 0.3, 1.0}}; }

}  // namespace

TEST_CASE("welfare of autarky and of the common pool") {
    const auto cfg = fixture_config();
    const auto ps = fixture3();
    std::vector<Allocation> autarky;
    double expected = 0.0;
    for (const auto& p : ps) {
        autarky.push_back({p.w, 0.0, false});
        expected += agricultural_utility(p.w, p, cfg);
    }
    CHECK(total_welfare(autarky, 123.0, ps, cfg) == doctest::Approx(expected).epsilon(1e-15));

    const auto res = clear_market(ps, cfg);
    double yields = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) yields += agricultural_utility(res.allocations[i].w_ag, ps[i], cfg);
    CHECK(relative_error(total_welfare(res.allocations, res.q, ps, cfg), yields) < 1e-9);
}

TEST_CASE("pairwise welfare decomposes over deals") {
    const auto cfg = fixture_config();
    Rng rng(4);
    const auto ps = wmtest::random_population(rng, 9);
    const auto out = pairwise_market(ps, PairingStrategy::greedy, cfg, 1);
    double sum = 0.0;
    for (std::size_t k : out.unpaired) sum += agricultural_utility(ps[k].w, ps[k], cfg);
    for (const auto& d : out.deals) {
        const auto pi = *std::find_if(ps.begin(), ps.end(), [&](auto& p) { return p.id == d.i; });
        const auto pj = *std::find_if(ps.begin(), ps.end(), [&](auto& p) { return p.id == d.j; });
        sum += total_utility(d.alloc_i, d.q_tilde, pi, cfg) + total_utility(d.alloc_j, d.q_tilde, pj, cfg);
    }
    CHECK(relative_error(out.total_welfare, sum) < 1e-12);
    CHECK(relative_error(total_welfare(out.allocations, out.prices, ps, cfg), sum) < 1e-12);
}

TEST_CASE("welfare gap") {
    const auto cfg = fixture_config();
    std::vector<Participant> same;
    for (int i = 0; i < 4; ++i) same.push_back({i + 1, 1.5, 0.5, 3.0});
    const auto flat = welfare_gap(same, cfg, PairingStrategy::stable, 0);
    CHECK(std::abs(flat.gap) <= 1e-12 * flat.scale);

    const std::vector<Participant> four{{1, 0.4, 0.1, 20.0}, {2, 2.2, 0.3, 1.0}, {3, 1.0, 0.0, 6.0}, {4, 3.0, 0.5, 0.0}};
    const auto cmp = compare_all_pairings(four, cfg);
    REQUIRE(cmp.pairing_welfare.size() == 3);
    for (double w : cmp.pairing_welfare) CHECK(cmp.u_common >= w - 1e-9 * cmp.scale);
    CHECK(cmp.min_margin >= -1e-9 * cmp.scale);
    for (auto s : {PairingStrategy::random, PairingStrategy::greedy, PairingStrategy::stable}) {
        const auto w = welfare_gap(four, cfg, s, 5);
        CHECK(w.common_pool_dominates());
        CHECK(w.per_agent.size() == 4);
    }
}

TEST_CASE("pareto f at the origin and its slope") {
    const auto cfg = fixture_config();
    const auto ps = fixture3();
    const auto res = clear_market(ps, cfg);
    const double scale = std::abs(total_welfare(res.allocations, res.q, ps, cfg));
    for (std::size_t to = 0; to < 3; ++to) {
        for (std::size_t from = 0; from < 3; ++from) {
            if (to == from) continue;
            CHECK(pareto_f(res, to, from, 0.0, ps, cfg) == 0.0);
            const double h = kParetoSlopeStep;
            // f(-h) is f with roles swapped.
            const double slope = (pareto_f(res, to, from, h, ps, cfg) - pareto_f(res, from, to, h, ps, cfg)) / (2 * h);
            CHECK(std::abs(slope) <= 1e-6 * scale);
            // Dense grid: strictly negative away from 0.
            const double d_max = res.allocations[from].w_ag;
            for (int k = 1; k <= 200; ++k) CHECK(pareto_f(res, to, from, d_max * k / 200.0, ps, cfg) < 0.0);
        }
    }
    CHECK_THROWS_AS((void)pareto_f(res, 0, 1, -1.0, ps, cfg), DomainError);
    CHECK_THROWS_AS((void)pareto_f(res, 0, 1, res.allocations[1].w_ag * 1.01, ps, cfg), DomainError);
}

TEST_CASE("pareto scan passes at equilibrium and fails when mispriced") {
    const auto cfg = fixture_config();
    const auto ps = fixture3();
    const auto res = clear_market(ps, cfg);
    const auto scan = pareto_scan(res, ps, cfg, 50, 1);
    CHECK(scan.passed);
    CHECK(scan.f_zero_at_origin);
    CHECK(scan.max_f <= kParetoValueTolerance * scan.scale);
    CHECK(scan.max_second_difference < 0.0);

    const auto bad = mispriced_allocation(res, ps, cfg);
    const auto control = pareto_scan(bad, ps, cfg, 50, 1);
    CHECK_FALSE(control.passed);
    CHECK(control.max_f > kParetoValueTolerance * control.scale);

    // Grid search confirms a profitable transfer exists in the control.
    double best = -INFINITY;
    for (std::size_t to = 0; to < 3; ++to)
        for (std::size_t from = 0; from < 3; ++from)
            if (to != from)
                for (int k = 1; k <= 100; ++k)
                    best = std::max(best, pareto_f(bad, to, from, bad.allocations[from].w_ag * k / 1000.0, ps, cfg));
    CHECK(best > 0.0);
}

TEST_CASE("pareto scan on two participants is concave") {
    const auto cfg = fixture_config();
    const std::vector<Participant> ps{{1, 0.5, 0.2, 10.0}, {2, 2.0, 0.2, 1.0}};
    const auto res = clear_market(ps, cfg);
    const auto scan = pareto_scan(res, ps, cfg, 20, 2);
    CHECK(scan.passed);
    CHECK(scan.fprime_at_zero.size() == 2);
    const double d_max = res.allocations[1].w_ag;
    const double h = d_max / 20.0;
    for (int k = 1; k < 20; ++k) {
        const double second = pareto_f(res, 0, 1, (k + 1) * h, ps, cfg) - 2 * pareto_f(res, 0, 1, k * h, ps, cfg) +
                              pareto_f(res, 0, 1, (k - 1) * h, ps, cfg);
        CHECK(second < 0.0);
    }
}

TEST_CASE("nash deviations at the fixture equilibrium") {
    const auto cfg = fixture_config();
    const auto ps = fixture3();
    const auto res = clear_market(ps, cfg);
    const auto report = nash_deviation_test(res, ps, cfg, 100, 3);
    CHECK(report.passed());
    CHECK(report.checks.size() == ps.size());

    const double scale = std::abs(total_welfare(res.allocations, res.q, ps, cfg));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& eq = res.allocations[i];
        const double u_eq = total_utility(eq, res.q, ps[i], cfg);
        CHECK(total_utility(eq, res.q, ps[i], cfg) - u_eq == 0.0);
        const Allocation sell_all{0.0, ps[i].w, false};
        CHECK(total_utility(sell_all, res.q, ps[i], cfg) <= u_eq);
        for (int k = 0; k <= 100; ++k) {
            const double w_ag = 2.0 * ps[i].w * k / 100.0;
            const Allocation dev{w_ag, ps[i].w - w_ag, false};
            CHECK(total_utility(dev, res.q, ps[i], cfg) - u_eq <= 1e-9 * scale);
        }
    }
}

TEST_CASE("nash test catches an off-equilibrium price") {
    const auto cfg = fixture_config();
    const auto ps = fixture3();
    const auto bad = mispriced_allocation(clear_market(ps, cfg), ps, cfg);
    CHECK_FALSE(nash_deviation_test(bad, ps, cfg, 100, 3).passed());
}

TEST_CASE("pareto slope at a receiver sitting next to the pole of its marginal") {
    auto cfg = fixture_config();
    cfg.gamma = 0.88;
    std::vector<Participant> ps{{1, 1.0, 0.1, 10.0}, {2, 1.2, 0.2, 5.0}, {3, 1.5, 0.3, 1.0}};
    // Participant 4 has no water, and a and b are chosen so that both its
    // demand and its intercept are about 1e-10: the pole of its marginal lies
    // far inside one nominal slope step.
    const double m0 = clear_market(ps, cfg).m;
    const double a = m0 / (cfg.crop_price * std::pow(2e-10, cfg.gamma - 1.0));
    const double target = 1e-10;
    ps.push_back({4, a, 0.0, 0.0});
    for (int it = 0; it < 50; ++it) {
        const double m = clear_market(ps, cfg).m;
        const double b_zero_demand = std::pow(m / (a * cfg.crop_price), 1.0 / (cfg.gamma - 1.0));
        ps[3].b = b_zero_demand - a * target / (1.0 - cfg.gamma);
    }
    const auto res = clear_market(ps, cfg);
    REQUIRE(res.clamped_count() == 0);
    REQUIRE(res.allocations[3].w_ag > 0.0);
    REQUIRE(res.allocations[3].w_ag < kParetoSlopeStep);
    REQUIRE(ps[3].b < kParetoSlopeStep);

    const auto scan = pareto_scan(res, ps, cfg, 50, 3);
    CHECK(scan.passed);
    for (const auto& s : scan.fprime_at_zero) CHECK(std::abs(s.slope) <= kParetoSlopeTolerance * scan.scale);
}
