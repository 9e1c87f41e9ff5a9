#include "watermarket/report.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "watermarket/market_csv.hpp"

namespace watermarket {

namespace {

std::string csv_cell(const Json& v) {
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return csv_number(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_null()) return "";
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

}  // namespace

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::error: return "error";
    }
    return "error";
}

std::optional<ReportFormat> parse_format(std::string_view name) noexcept {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    return std::nullopt;
}

Json to_json(const Report& report) {
    Json j;
    j["scenario_hash"] = report.scenario_hash;
    j["experiment"] = report.experiment;
    j["verdict"] = to_string(report.verdict);
    j["metrics"] = report.metrics;
    j["details"] = report.details;
    return j;
}

std::string render_report(const Report& report, ReportFormat format) {
    if (format == ReportFormat::json) return to_json(report).dump(2) + "\n";

    std::ostringstream os;
    if (report.table) {
        for (std::size_t k = 0; k < report.table->header.size(); ++k)
            os << (k ? "," : "") << csv_cell(report.table->header[k]);
        os << '\n';
        for (const auto& row : report.table->rows) {
            for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << csv_cell(row[k]);
            os << '\n';
        }
        return os.str();
    }
    os << "key,value\n";
    os << "experiment," << csv_cell(report.experiment) << '\n';
    os << "verdict," << to_string(report.verdict) << '\n';
    for (const auto& [key, value] : report.metrics.items()) os << csv_cell(key) << ',' << csv_cell(value) << '\n';
    return os.str();
}

void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << render_report(report, format);
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace watermarket
