#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace watermarket {

using Json = nlohmann::ordered_json;

enum class Verdict { pass, fail, error };
enum class ReportFormat { json, csv };

[[nodiscard]] const char* to_string(Verdict v) noexcept;
[[nodiscard]] std::optional<ReportFormat> parse_format(std::string_view name) noexcept;

/// Flat table for CSV output; cells are JSON numbers, strings or booleans.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Json>> rows;
};

/// Result of one experiment. Holds no timestamps so reruns compare equal.
struct Report {
    std::string scenario_hash;
    std::string experiment;
    Verdict verdict = Verdict::error;
    Json metrics = Json::object();
    Json details = Json::object();
    std::optional<Table> table;
};

[[nodiscard]] Json to_json(const Report& report);

/// JSON: the report object, numbers at full precision. CSV: the table when
/// present, else `key,value` rows of the metrics, numbers at 6 significant digits.
[[nodiscard]] std::string render_report(const Report& report, ReportFormat format);

/// Throws IoError when the file cannot be written.
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace watermarket
