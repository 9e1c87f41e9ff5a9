// watermarket: run market experiments from a scenario file or from flags.
// Exit status: 0 every verdict passed, 1 a verification failed, 2 bad input.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "watermarket/market_csv.hpp"
#include "watermarket/scenario.hpp"

namespace wm = watermarket;

namespace {

struct Options {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<double> gamma, lambda, T, crop_price;
    std::optional<std::string> out, format, data, strategy;
    std::optional<std::size_t> replicates, samples;
};

void add_flags(CLI::App* cmd, Options& o, bool with_data) {
    cmd->add_option("--scenario", o.scenario, "scenario JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "base seed for every random draw");
    cmd->add_option("--n", o.n, "number of generated participants");
    cmd->add_option("--gamma", o.gamma, "HARA exponent in (0,1)");
    cmd->add_option("--lambda", o.lambda, "discount rate");
    cmd->add_option("--T", o.T, "growing period (years)");
    cmd->add_option("--crop-price", o.crop_price, "crop price");
    cmd->add_option("--out", o.out, "directory for reports (stdout when omitted)");
    cmd->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--strategy", o.strategy, "pairing strategy: random, greedy or stable");
    cmd->add_option("--replicates", o.replicates, "compare: independent populations");
    cmd->add_option("--samples", o.samples, "pareto/nash: random samples");
    if (with_data) cmd->add_option("--data", o.data, "CSV input")->check(CLI::ExistingFile);
}

// Flags become a JSON patch so they are part of the scenario hash.
wm::Json overrides_from(const Options& o, const std::string& experiment) {
    wm::Json patch = wm::Json::object();
    if (o.gamma) patch["config"]["gamma"] = *o.gamma;
    if (o.lambda) patch["config"]["lambda"] = *o.lambda;
    if (o.T) patch["config"]["T"] = *o.T;
    if (o.crop_price) patch["config"]["crop_price"] = *o.crop_price;
    if (o.seed) patch["seed"] = *o.seed;
    if (o.n) patch["generator"]["n"] = *o.n;
    if (o.format) patch["output"]["format"] = *o.format;
    if (o.strategy) patch["strategy"] = *o.strategy;
    if (o.replicates) patch["replicates"] = *o.replicates;
    if (o.samples) patch["samples"] = *o.samples;
    if (o.data) {
        const auto abs = std::filesystem::absolute(*o.data).string();
        patch[experiment == "calibrate" ? "yield_data" : "data"] = abs;
    }
    return patch;
}

wm::Scenario scenario_from(const Options& o, const std::string& experiment) {
    auto patch = overrides_from(o, experiment);
    if (!o.scenario.empty()) {
        if (o.n) patch["participants"] = nullptr;  // --n replaces an explicit population
        return wm::load_scenario(o.scenario, patch);
    }
    wm::Json doc = patch;
    doc["experiments"] = wm::Json::array({experiment});
    if (experiment != "calibrate" && experiment != "table1" && !doc.contains("generator"))
        doc["generator"]["n"] = 10;
    return wm::parse_scenario(doc);
}

int report_and_exit(const std::vector<wm::Report>& reports, const std::optional<std::string>& out,
                    const wm::Scenario& scenario, bool to_stdout) {
    int code = 0;
    const char* ext = scenario.format == wm::ReportFormat::json ? ".json" : ".csv";
    for (const auto& r : reports) {
        code = std::max(code, wm::exit_code_for(r.verdict));
        if (to_stdout) {
            std::cout << wm::render_report(r, scenario.format);
        } else {
            const std::filesystem::path dir = out ? std::filesystem::path(*out) : scenario.output_dir;
            std::filesystem::create_directories(dir);
            const auto path = dir / (r.experiment + ext);
            wm::emit_report(r, scenario.format, path);
            std::cerr << r.experiment << ": " << wm::to_string(r.verdict) << " -> " << path.string() << '\n';
        }
        if (r.verdict == wm::Verdict::error && r.details.contains("error"))
            std::cerr << r.experiment << ": " << r.details["error"].get<std::string>() << '\n';
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Water market clearing, pairing and calibration experiments"};
    app.require_subcommand(1);

    Options opts;
    std::string chosen;
    for (auto name : wm::kExperiments) {
        const std::string cmd_name(name);
        auto* cmd = app.add_subcommand(cmd_name, "run the " + cmd_name + " experiment");
        add_flags(cmd, opts, cmd_name == "table1" || cmd_name == "calibrate");
        cmd->callback([&chosen, cmd_name] { chosen = cmd_name; });
    }
    auto* run = app.add_subcommand("run", "run every experiment listed in a scenario");
    add_flags(run, opts, false);
    run->callback([&chosen] { chosen = "run"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (chosen == "run") {
            if (opts.scenario.empty()) {
                std::cerr << "run: --scenario is required\n";
                return 2;
            }
            const auto scenario = wm::load_scenario(opts.scenario, overrides_from(opts, "run"));
            std::vector<wm::Report> reports;
            for (const auto& e : scenario.experiments) reports.push_back(wm::run_experiment(scenario, e));
            return report_and_exit(reports, opts.out, scenario, false);
        }
        const auto scenario = scenario_from(opts, chosen);
        const bool to_stdout = !opts.out && opts.scenario.empty();
        return report_and_exit({wm::run_experiment(scenario, chosen)}, opts.out, scenario, to_stdout);
    } catch (const wm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
