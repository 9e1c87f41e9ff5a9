#pragma once

// Batch experiment description and its runner. A scenario names a market
// (explicit participants or a seeded generator), the experiments to run in
// order, and where reports go.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "watermarket/market_core.hpp"
#include "watermarket/pairwise.hpp"
#include "watermarket/report.hpp"

namespace watermarket {

/// Scenario file is malformed or inconsistent.
class ScenarioError : public Error {
public:
    using Error::Error;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct GeneratorSpec {
    std::size_t n = 10;
    Range a{0.1, 5.0};
    Range b{0.0, 2.0};
    Range w{0.0, 100.0};
    bool interior = false;  // redraw until nobody is clamped at the clearing price
};

struct Scenario {
    MarketConfig config;
    std::variant<std::vector<Participant>, GeneratorSpec> population;  // may be empty for calibration-only runs
    std::vector<std::string> experiments;
    std::optional<std::uint64_t> seed;
    std::filesystem::path output_dir = ".";
    ReportFormat format = ReportFormat::json;

    PairingStrategy strategy = PairingStrategy::stable;
    std::size_t replicates = 1;  // compare: independent draws
    std::size_t samples = 100;   // pareto / nash sampling budget
    std::optional<std::filesystem::path> market_data;  // table1
    std::optional<std::filesystem::path> yield_data;   // calibrate
    double growing_period = 0.5;                       // T held fixed in the table1 fit
    std::size_t calibration_participants = 15;

    Json source;  // canonical input, hashed into every report
};

inline constexpr std::string_view kExperiments[] = {"clear", "pairwise", "compare", "pareto",
                                                    "nash",  "calibrate", "table1"};

[[nodiscard]] bool is_experiment(std::string_view name) noexcept;

/// True for experiments that draw random numbers and so need a seed.
[[nodiscard]] bool experiment_needs_seed(const Scenario& scenario, std::string_view experiment) noexcept;

/// Validates keys and invariants; throws ScenarioError.
[[nodiscard]] Scenario parse_scenario(const Json& doc);
/// `overrides` is merged into the document (JSON merge patch) before parsing,
/// so it takes part in the hash. Relative paths resolve against the file's directory.
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path, const Json& overrides = Json::object());

/// FNV-1a over the canonical dump of the scenario document.
[[nodiscard]] std::string scenario_hash(const Scenario& scenario);

[[nodiscard]] std::vector<Participant> generate_population(const GeneratorSpec& spec, const MarketConfig& cfg,
                                                           std::uint64_t seed);

/// Participants of the scenario; generated ones use the given seed.
[[nodiscard]] std::vector<Participant> population_for(const Scenario& scenario, std::uint64_t seed);

/// Runs one experiment. Library errors become an `error` verdict. Random
/// draws derive from the scenario seed and the experiment name only, so an
/// experiment reports the same content whether run alone or in a batch.
[[nodiscard]] Report run_experiment(const Scenario& scenario, std::string_view experiment);

struct RunSummary {
    std::vector<Report> reports;
    std::vector<std::filesystem::path> files;
    int exit_code = 0;  // 0 all pass, 1 some verification failed, 2 input error
};

/// Runs every experiment in declaration order, writing `<output_dir>/<experiment>.<ext>`
/// when `write` is set.
[[nodiscard]] RunSummary run_scenario(const Scenario& scenario, bool write = true);

[[nodiscard]] int exit_code_for(Verdict v) noexcept;

}  // namespace watermarket
