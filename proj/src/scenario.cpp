#include "watermarket/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "watermarket/analysis.hpp"
#include "watermarket/calibration.hpp"
#include "watermarket/common_pool.hpp"
#include "watermarket/market_csv.hpp"
#include "watermarket/random.hpp"

namespace watermarket {

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Range parse_range(const Json& j, const char* key, Range fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ScenarioError(std::string("generator.") + key + " must be [lo, hi]");
    Range r{v[0].get<double>(), v[1].get<double>()};
    if (!(r.lo <= r.hi)) throw ScenarioError(std::string("generator.") + key + " has lo > hi");
    return r;
}

bool uses_population(std::string_view e) { return e != "calibrate" && e != "table1"; }

Json allocation_json(const Participant& p, const Allocation& a) {
    return Json{{"id", p.id}, {"a", p.a}, {"b", p.b}, {"w", p.w},
                {"w_ag", a.w_ag}, {"w_tr", a.w_tr}, {"clamped", a.clamped}};
}

Json failing_checks(const VerificationReport& report) {
    Json out = Json::array();
    for (const auto& c : report.checks) {
        if (c.passed) continue;
        Json j{{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}};
        if (c.participant) j["participant"] = *c.participant;
        out.push_back(std::move(j));
    }
    return out;
}

double max_residual(const VerificationReport& report, std::string_view prefix) {
    double worst = 0.0;
    for (const auto& c : report.checks)
        if (c.name.rfind(prefix, 0) == 0) worst = std::max(worst, c.residual);
    return worst;
}

Verdict verdict_of(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

std::uint64_t experiment_seed(const Scenario& s, std::string_view experiment) {
    return derive_seed(s.seed.value_or(0), fnv1a(experiment));
}

// ---- experiments ---------------------------------------------------------

void run_clear(const Scenario& s, Report& r) {
    const auto ps = population_for(s, s.seed.value_or(0));
    const auto res = clear_market(ps, s.config);
    const auto kkt = verify_kkt(res, ps, s.config);
    const double numeric = clearing_price_numeric(ps, s.config);

    r.metrics["q"] = res.q;
    r.metrics["m"] = res.m;
    r.metrics["W"] = res.total_water;
    r.metrics["participants"] = ps.size();
    r.metrics["clamped"] = res.clamped_count();
    r.metrics["passes"] = res.passes;
    r.metrics["q_numeric"] = numeric;
    r.metrics["price_rel_diff"] = std::abs(res.q - numeric) / numeric;
    r.metrics["max_stationarity"] = max_residual(kkt, "stationarity");
    r.metrics["clearing_residual"] = max_residual(kkt, "clearing");

    Table table{{"id", "w", "w_ag", "w_tr", "clamped"}, {}};
    Json allocs = Json::array();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        allocs.push_back(allocation_json(ps[i], res.allocations[i]));
        const auto& a = res.allocations[i];
        table.rows.push_back({ps[i].id, ps[i].w, a.w_ag, a.w_tr, a.clamped});
    }
    r.details["allocations"] = std::move(allocs);
    r.details["failed_checks"] = failing_checks(kkt);
    r.table = std::move(table);
    r.verdict = verdict_of(kkt.passed() && std::abs(res.q - numeric) <= kStationarityTolerance * numeric);
}

void run_pairwise(const Scenario& s, Report& r) {
    const auto ps = population_for(s, s.seed.value_or(0));
    const auto out = pairwise_market(ps, s.strategy, s.config, experiment_seed(s, "pairwise"));
    const double W = total_endowment(ps);
    const double scale = std::abs(out.total_welfare);

    double traded = 0.0;
    for (const auto& a : out.allocations) traded += a.w_tr;
    double worst_gain = 0.0;
    Json deals = Json::array();
    Table table{{"i", "j", "q_tilde", "w_tr_i", "w_tr_j", "gain_i", "gain_j"}, {}};
    auto index_of = [&](ParticipantId id) {
        return static_cast<std::size_t>(
            std::find_if(ps.begin(), ps.end(), [&](const Participant& p) { return p.id == id; }) - ps.begin());
    };
    for (const auto& d : out.deals) {
        const auto& pi = ps[index_of(d.i)];
        const auto& pj = ps[index_of(d.j)];
        const auto [gi, gj] = deal_gains(d, pi, pj, s.config);
        worst_gain = std::min({worst_gain, gi, gj});
        deals.push_back({{"i", d.i}, {"j", d.j}, {"q_tilde", d.q_tilde}, {"w_tr_i", d.alloc_i.w_tr},
                         {"w_tr_j", d.alloc_j.w_tr}, {"gain_i", gi}, {"gain_j", gj}});
        table.rows.push_back({d.i, d.j, d.q_tilde, d.alloc_i.w_tr, d.alloc_j.w_tr, gi, gj});
    }
    r.metrics["strategy"] = to_string(out.strategy);
    r.metrics["total_welfare"] = out.total_welfare;
    r.metrics["deals"] = out.deals.size();
    r.metrics["unpaired"] = out.unpaired.size();
    if (out.stages) {
        r.metrics["stages"] = *out.stages;
        r.metrics["stage_bound"] = stage_bound(ps.size());
    }
    r.metrics["conservation_residual"] = std::abs(traded);
    r.metrics["min_gain"] = worst_gain;
    r.details["deals"] = std::move(deals);
    r.table = std::move(table);
    r.verdict = verdict_of(std::abs(traded) <= kClearingTolerance * W && worst_gain >= -1e-9 * scale);
}

void run_compare(const Scenario& s, Report& r) {
    const std::uint64_t base = s.seed.value_or(0);
    Table table{{"replicate", "seed", "strategy", "u_common", "u_pairwise", "gap", "relative_gap", "dominates"}, {}};
    Json rows = Json::array();
    bool ok = true;
    double min_rel_gap = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < s.replicates; ++rep) {
        const std::uint64_t seed = rep == 0 ? base : derive_seed(base, rep);
        const auto ps = population_for(s, seed);
        for (auto strategy : {PairingStrategy::random, PairingStrategy::greedy, PairingStrategy::stable}) {
            const auto w = welfare_gap(ps, s.config, strategy, derive_seed(seed, 7));
            const double rel = w.scale > 0.0 ? w.gap / w.scale : w.gap;
            min_rel_gap = std::min(min_rel_gap, rel);
            ok = ok && w.common_pool_dominates();
            table.rows.push_back({rep, seed, to_string(strategy), w.u_common, w.u_pairwise, w.gap, rel,
                                  w.common_pool_dominates()});
            rows.push_back({{"replicate", rep}, {"seed", seed}, {"strategy", to_string(strategy)},
                            {"u_common", w.u_common}, {"u_pairwise", w.u_pairwise}, {"gap", w.gap}});
        }
    }
    r.metrics["replicates"] = s.replicates;
    r.metrics["min_relative_gap"] = min_rel_gap;
    r.metrics["common_pool_stages"] = 1;
    r.details["runs"] = std::move(rows);
    r.table = std::move(table);
    r.verdict = verdict_of(ok);
}

void run_pareto(const Scenario& s, Report& r) {
    const auto ps = population_for(s, s.seed.value_or(0));
    const auto res = clear_market(ps, s.config);
    const std::uint64_t seed = experiment_seed(s, "pareto");
    const auto scan = pareto_scan(res, ps, s.config, s.samples, seed);
    const auto control = pareto_scan(mispriced_allocation(res, ps, s.config), ps, s.config, s.samples, seed);

    r.metrics["samples"] = scan.samples.size();
    r.metrics["scale"] = scan.scale;
    r.metrics["max_f"] = scan.max_f;
    r.metrics["max_abs_fprime_at_zero"] = scan.max_abs_fprime;
    r.metrics["max_second_difference"] = scan.max_second_difference;
    r.metrics["f_zero_at_origin"] = scan.f_zero_at_origin;
    r.metrics["scan_passed"] = scan.passed;
    r.metrics["control_max_f"] = control.max_f;
    r.metrics["control_failed"] = !control.passed;
    r.verdict = verdict_of(scan.passed && !control.passed);
}

void run_nash(const Scenario& s, Report& r) {
    const auto ps = population_for(s, s.seed.value_or(0));
    const auto res = clear_market(ps, s.config);
    const auto report = nash_deviation_test(res, ps, s.config, s.samples, experiment_seed(s, "nash"));
    r.metrics["participants"] = ps.size();
    r.metrics["deviations_per_participant"] = s.samples + 102;
    r.metrics["max_improvement"] = max_residual(report, "nash");
    r.details["failed_checks"] = failing_checks(report);
    r.verdict = verdict_of(report.passed());
}

std::vector<YieldDatum> synthetic_yield_fixture() {
    // a = 1.2, b = 0.8, gamma = 0.45 with 1% multiplicative noise.
    const Participant p{0, 1.2, 0.8, 0.0};
    MarketConfig cfg;
    cfg.gamma = 0.45;
    Rng rng(20151);
    std::vector<YieldDatum> data;
    for (int k = 0; k < 24; ++k) {
        const double w = 5.0 * k;
        data.push_back({w, crop_yield(w, p, cfg) * (1.0 + 0.01 * rng.uniform(-1.0, 1.0))});
    }
    return data;
}

void run_calibrate(const Scenario& s, Report& r) {
    const auto data = s.yield_data ? ingest_yield_csv(*s.yield_data) : synthetic_yield_fixture();
    const auto fit = fit_hara_yield(data);
    r.metrics["source"] = s.yield_data ? s.yield_data->generic_string() : std::string("synthetic");
    r.metrics["points"] = data.size();
    r.metrics["a"] = fit.a;
    r.metrics["b"] = fit.b;
    r.metrics["gamma"] = fit.gamma;
    r.metrics["rms_relative_residual"] = fit.diagnostics.rms;
    r.metrics["starts"] = fit.diagnostics.starts;
    r.metrics["converged_starts"] = fit.diagnostics.converged;
    Table table{{"water", "yield", "fitted", "relative_residual"}, {}};
    for (std::size_t k = 0; k < data.size(); ++k)
        table.rows.push_back({data[k].water, data[k].yield, fit.predict(data[k].water), fit.diagnostics.residuals[k]});
    r.table = std::move(table);
    r.verdict = verdict_of(std::isfinite(fit.diagnostics.rms));
}

void run_table1(const Scenario& s, Report& r) {
    const auto rows = s.market_data ? ingest_market_csv(*s.market_data) : murray_2015_16();
    MarketFitOptions options;
    options.T = s.growing_period;
    const auto fit = fit_market_aggregates(rows, s.config.lambda, s.calibration_participants, options);
    const auto table = reproduce_table(fit, rows);

    r.metrics["source"] = s.market_data ? s.market_data->generic_string() : std::string("built-in");
    r.metrics["water_unit_conversion"] = "water_gl x 1000 -> ML";
    r.metrics["lambda"] = fit.lambda;
    r.metrics["T"] = fit.T;
    r.metrics["participants"] = fit.participants;
    r.metrics["target"] = fit.target == PriceTarget::model_column ? "model_price" : "actual_price";
    r.metrics["s_b"] = fit.s_b;
    r.metrics["s_a"] = fit.s_a;
    r.metrics["gamma"] = fit.gamma;
    r.metrics["fit_rms"] = fit.diagnostics.rms;
    r.metrics["rms_vs_actual"] = table.rms_vs_actual;
    if (table.rms_vs_published) r.metrics["rms_vs_published_model"] = *table.rms_vs_published;
    r.metrics["months_below_10pct"] = table.months_below_10pct;

    bool ok = true;
    if (table.rms_vs_published) {
        ok = *table.rms_vs_published <= 0.05;
        for (const auto& line : table.lines) {
            if (line.month == "JUL" && line.published_model_price) {
                const double dev = std::abs(line.model_price / *line.published_model_price - 1.0);
                r.metrics["jul_model_price"] = line.model_price;
                ok = ok && dev <= 0.03;
            }
        }
    } else {
        ok = table.months_below_10pct * 4 >= table.lines.size() * 3;
    }

    Table out{{"Month", "Water (GL)", "Actual median price ($/ML)", "Wheat price ($/T)", "Price in the model ($/ML)",
               "Relative residual (%)"},
              {}};
    Json lines = Json::array();
    for (const auto& line : table.lines) {
        out.rows.push_back({line.month, line.water_gl, line.actual_price, line.crop_price, line.model_price,
                            static_cast<int>(std::lround(line.residual * 100.0))});
        Json j{{"month", line.month}, {"water_gl", line.water_gl}, {"actual_price", line.actual_price},
               {"crop_price", line.crop_price}, {"model_price", line.model_price}, {"residual", line.residual}};
        if (line.published_model_price) j["published_model_price"] = *line.published_model_price;
        if (line.published_residual) j["published_residual"] = *line.published_residual;
        lines.push_back(std::move(j));
    }
    r.details["rows"] = std::move(lines);
    r.table = std::move(out);
    r.verdict = verdict_of(ok);
}

}  // namespace

bool is_experiment(std::string_view name) noexcept {
    return std::find(std::begin(kExperiments), std::end(kExperiments), name) != std::end(kExperiments);
}

bool experiment_needs_seed(const Scenario& s, std::string_view e) noexcept {
    if (uses_population(e) && std::holds_alternative<GeneratorSpec>(s.population)) return true;
    if (e == "compare" || e == "pareto" || e == "nash") return true;
    return e == "pairwise" && s.strategy == PairingStrategy::random;
}

Scenario parse_scenario(const Json& doc) {
    if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
    static const std::vector<std::string> known = {
        "config", "participants", "generator", "experiments", "seed", "output", "strategy", "replicates",
        "samples", "data", "yield_data", "growing_period", "calibration_participants"};
    for (const auto& [key, value] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ScenarioError("unknown key '" + key + "'");

    Scenario s;
    try {
        if (doc.contains("config")) {
            const auto& c = doc.at("config");
            s.config.gamma = c.value("gamma", s.config.gamma);
            s.config.lambda = c.value("lambda", s.config.lambda);
            s.config.T = c.value("T", s.config.T);
            s.config.crop_price = c.value("crop_price", s.config.crop_price);
        }
        const auto cfg_report = validate(s.config);
        if (!cfg_report.ok()) throw ScenarioError("config violates " + cfg_report.violations.front());

        const bool has_participants = doc.contains("participants");
        const bool has_generator = doc.contains("generator");
        if (has_participants && has_generator)
            throw ScenarioError("give either 'participants' or 'generator', not both");
        if (has_participants) {
            std::vector<Participant> ps;
            ParticipantId next_id = 1;
            for (const auto& pj : doc.at("participants")) {
                Participant p;
                p.id = pj.value("id", next_id);
                p.a = pj.at("a").get<double>();
                p.b = pj.value("b", 0.0);
                p.w = pj.at("w").get<double>();
                next_id = p.id + 1;
                const auto rep = validate(p, s.config);
                if (!rep.ok()) throw ScenarioError("participant " + std::to_string(p.id) + " violates " + rep.violations.front());
                ps.push_back(p);
            }
            if (ps.empty()) throw ScenarioError("'participants' is empty");
            s.population = std::move(ps);
        } else if (has_generator) {
            const auto& g = doc.at("generator");
            GeneratorSpec spec;
            spec.n = g.at("n").get<std::size_t>();
            spec.a = parse_range(g, "a", spec.a);
            spec.b = parse_range(g, "b", spec.b);
            spec.w = parse_range(g, "w", spec.w);
            spec.interior = g.value("interior", false);
            if (spec.n == 0) throw ScenarioError("generator.n must be >= 1");
            if (!(spec.a.lo > 0.0) || spec.b.lo < 0.0 || spec.w.lo < 0.0 || !(spec.w.hi > 0.0))
                throw ScenarioError("generator ranges must keep a > 0, b >= 0, w >= 0 and allow w > 0");
            s.population = spec;
        }

        if (!doc.contains("experiments") || !doc.at("experiments").is_array() || doc.at("experiments").empty())
            throw ScenarioError("'experiments' must be a non-empty array");
        for (const auto& e : doc.at("experiments")) {
            const auto name = e.get<std::string>();
            if (!is_experiment(name)) throw ScenarioError("unknown experiment '" + name + "'");
            s.experiments.push_back(name);
        }

        if (doc.contains("seed")) s.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("output")) {
            const auto& o = doc.at("output");
            s.output_dir = o.value("path", std::string("."));
            const auto fmt = parse_format(o.value("format", std::string("json")));
            if (!fmt) throw ScenarioError("output.format must be json or csv");
            s.format = *fmt;
        }
        if (doc.contains("strategy")) {
            const auto st = parse_strategy(doc.at("strategy").get<std::string>());
            if (!st) throw ScenarioError("strategy must be random, greedy or stable");
            s.strategy = *st;
        }
        s.replicates = doc.value("replicates", s.replicates);
        s.samples = doc.value("samples", s.samples);
        if (s.replicates == 0) throw ScenarioError("replicates must be >= 1");
        if (doc.contains("data")) s.market_data = doc.at("data").get<std::string>();
        if (doc.contains("yield_data")) s.yield_data = doc.at("yield_data").get<std::string>();
        s.growing_period = doc.value("growing_period", s.growing_period);
        s.calibration_participants = doc.value("calibration_participants", s.calibration_participants);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    }

    const bool has_population = doc.contains("participants") || doc.contains("generator");
    for (const auto& e : s.experiments) {
        if (uses_population(e) && !has_population)
            throw ScenarioError("experiment '" + e + "' needs 'participants' or 'generator'");
        if (experiment_needs_seed(s, e) && !s.seed)
            throw ScenarioError("'seed' is required by experiment '" + e + "'");
    }
    s.source = doc;
    return s;
}

Scenario load_scenario(const std::filesystem::path& path, const Json& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
        if (!overrides.empty()) doc.merge_patch(overrides);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
    auto s = parse_scenario(doc);
    const auto base = path.parent_path();
    auto resolve = [&](std::optional<std::filesystem::path>& p) {
        if (p && p->is_relative()) p = base / *p;
    };
    resolve(s.market_data);
    resolve(s.yield_data);
    if (s.output_dir.is_relative()) s.output_dir = base / s.output_dir;
    return s;
}

std::string scenario_hash(const Scenario& scenario) {
    // Key order of the source document does not matter: hash the sorted form.
    const auto canonical = nlohmann::json::parse(scenario.source.dump()).dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
    return buf;
}

std::vector<Participant> generate_population(const GeneratorSpec& spec, const MarketConfig& cfg, std::uint64_t seed) {
    constexpr int kMaxDraws = 1000;
    Rng rng(seed);
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        std::vector<Participant> ps(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            ps[i].id = static_cast<ParticipantId>(i + 1);
            ps[i].a = rng.uniform(spec.a.lo, spec.a.hi);
            ps[i].b = rng.uniform(spec.b.lo, spec.b.hi);
            ps[i].w = rng.uniform(spec.w.lo, spec.w.hi);
        }
        if (!(total_endowment(ps) > 0.0)) continue;
        if (!spec.interior) return ps;
        if (clear_market(ps, cfg).clamped_count() == 0) return ps;
    }
    throw ScenarioError("generator could not draw a valid population");
}

std::vector<Participant> population_for(const Scenario& scenario, std::uint64_t seed) {
    if (const auto* ps = std::get_if<std::vector<Participant>>(&scenario.population)) return *ps;
    return generate_population(std::get<GeneratorSpec>(scenario.population), scenario.config, seed);
}

Report run_experiment(const Scenario& scenario, std::string_view experiment) {
    Report r;
    r.scenario_hash = scenario_hash(scenario);
    r.experiment = std::string(experiment);
    try {
        if (experiment_needs_seed(scenario, experiment) && !scenario.seed)
            throw ScenarioError("'seed' is required by experiment '" + std::string(experiment) + "'");
        if (uses_population(experiment) && std::holds_alternative<std::vector<Participant>>(scenario.population) &&
            std::get<std::vector<Participant>>(scenario.population).empty())
            throw ScenarioError("experiment '" + std::string(experiment) + "' needs participants");
        if (experiment == "clear") run_clear(scenario, r);
        else if (experiment == "pairwise") run_pairwise(scenario, r);
        else if (experiment == "compare") run_compare(scenario, r);
        else if (experiment == "pareto") run_pareto(scenario, r);
        else if (experiment == "nash") run_nash(scenario, r);
        else if (experiment == "calibrate") run_calibrate(scenario, r);
        else if (experiment == "table1") run_table1(scenario, r);
        else throw ScenarioError("unknown experiment '" + std::string(experiment) + "'");
    } catch (const Error& e) {
        r.verdict = Verdict::error;
        r.table.reset();
        r.details["error"] = e.what();
    }
    return r;
}

int exit_code_for(Verdict v) noexcept {
    switch (v) {
        case Verdict::pass: return 0;
        case Verdict::fail: return 1;
        case Verdict::error: return 2;
    }
    return 2;
}

RunSummary run_scenario(const Scenario& scenario, bool write) {
    RunSummary summary;
    if (write) {
        std::error_code ec;
        std::filesystem::create_directories(scenario.output_dir, ec);
        if (ec) throw IoError("cannot create " + scenario.output_dir.string() + ": " + ec.message());
    }
    const char* ext = scenario.format == ReportFormat::json ? ".json" : ".csv";
    for (const auto& experiment : scenario.experiments) {
        auto report = run_experiment(scenario, experiment);
        summary.exit_code = std::max(summary.exit_code, exit_code_for(report.verdict));
        if (write) {
            const auto path = scenario.output_dir / (experiment + ext);
            emit_report(report, scenario.format, path);
            summary.files.push_back(path);
        }
        summary.reports.push_back(std::move(report));
    }
    return summary;
}

}  // namespace watermarket
