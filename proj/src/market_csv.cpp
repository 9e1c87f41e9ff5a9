#include "watermarket/market_csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace watermarket {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::optional<double> to_number(std::string text) {
    if (text.empty()) return std::nullopt;
    double scale = 1.0;
    if (text.back() == '%') {
        text.pop_back();
        scale = 0.01;
    }
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value * scale;
}

// Reads the header and maps column name -> position; skips blank lines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    std::map<std::string, std::size_t> header() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            line = trim(line);
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line.empty()) continue;
            std::map<std::string, std::size_t> cols;
            const auto names = split(line);
            for (std::size_t k = 0; k < names.size(); ++k) {
                std::string name = names[k];
                std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
                cols[name] = k;
            }
            return cols;
        }
        throw ParseError("no header", line_no_, "");
    }

    bool next(std::vector<std::string>& cells) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (trim(line).empty()) continue;
            cells = split(line);
            return true;
        }
        return false;
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

std::size_t require_column(const std::map<std::string, std::size_t>& cols, const std::string& name) {
    auto it = cols.find(name);
    if (it == cols.end()) throw ParseError("missing column '" + name + "'", 1, name);
    return it->second;
}

std::string cell_at(const std::vector<std::string>& cells, std::size_t k) { return k < cells.size() ? cells[k] : std::string{}; }

double required_number(const std::vector<std::string>& cells, std::size_t k, const std::string& column, std::size_t line) {
    const auto text = cell_at(cells, k);
    const auto value = to_number(text);
    if (!value) {
        std::ostringstream os;
        os << "line " << line << ": column '" << column << "' is not a number: '" << text << "'";
        throw ParseError(os.str(), line, column);
    }
    return *value;
}

std::optional<double> optional_number(const std::vector<std::string>& cells, std::optional<std::size_t> k,
                                      const std::string& column, std::size_t line) {
    if (!k) return std::nullopt;
    const auto text = cell_at(cells, *k);
    if (text.empty()) return std::nullopt;
    return required_number(cells, *k, column, line);
}

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

std::vector<MarketRow> parse_market_csv(std::istream& in) {
    CsvReader reader(in);
    const auto cols = reader.header();
    const auto month = require_column(cols, "month");
    const auto water = require_column(cols, "water_gl");
    const auto actual = require_column(cols, "actual_price");
    const auto crop = require_column(cols, "crop_price");
    auto optional_column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = cols.find(name);
        return it == cols.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    };
    const auto model = optional_column("model_price");
    const auto residual = optional_column("residual");

    std::vector<MarketRow> rows;
    std::vector<std::string> cells;
    while (reader.next(cells)) {
        const auto line = reader.line();
        MarketRow row;
        row.month = cell_at(cells, month);
        if (row.month.empty()) throw ParseError("line " + std::to_string(line) + ": empty month", line, "month");
        row.water_gl = required_number(cells, water, "water_gl", line);
        row.actual_price = required_number(cells, actual, "actual_price", line);
        row.crop_price = required_number(cells, crop, "crop_price", line);
        row.model_price = optional_number(cells, model, "model_price", line);
        row.residual = optional_number(cells, residual, "residual", line);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<MarketRow> ingest_market_csv(const std::filesystem::path& path) {
    auto in = open(path);
    return parse_market_csv(in);
}

std::vector<YieldDatum> parse_yield_csv(std::istream& in) {
    CsvReader reader(in);
    const auto cols = reader.header();
    const auto water = require_column(cols, "water");
    const auto yield = require_column(cols, "yield");
    std::vector<YieldDatum> data;
    std::vector<std::string> cells;
    while (reader.next(cells)) {
        const auto line = reader.line();
        data.push_back({required_number(cells, water, "water", line), required_number(cells, yield, "yield", line)});
    }
    return data;
}

std::vector<YieldDatum> ingest_yield_csv(const std::filesystem::path& path) {
    auto in = open(path);
    return parse_yield_csv(in);
}

std::string csv_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string format_market_csv(std::span<const MarketRow> rows) {
    std::ostringstream os;
    os << "month,water_gl,actual_price,crop_price,model_price,residual\n";
    for (const auto& r : rows) {
        os << r.month << ',' << csv_number(r.water_gl) << ',' << csv_number(r.actual_price) << ','
           << csv_number(r.crop_price) << ',' << (r.model_price ? csv_number(*r.model_price) : "") << ','
           << (r.residual ? csv_number(*r.residual) : "") << '\n';
    }
    return os.str();
}

}  // namespace watermarket
