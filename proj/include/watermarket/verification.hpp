#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "watermarket/market_core.hpp"

namespace watermarket {

/// One numerical check: residual compared against its tolerance.
struct Check {
    std::string name;
    std::optional<ParticipantId> participant;
    double residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerificationReport {
    std::vector<Check> checks;

    [[nodiscard]] bool passed() const noexcept {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }

    [[nodiscard]] std::size_t failures() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
    }

    /// First failing check whose name starts with `prefix`, if any.
    [[nodiscard]] const Check* find_failure(const std::string& prefix,
                                            std::optional<ParticipantId> who = std::nullopt) const {
        for (const auto& c : checks) {
            if (c.passed || c.name.rfind(prefix, 0) != 0) continue;
            if (who && c.participant != who) continue;
            return &c;
        }
        return nullptr;
    }

    void add(std::string name, std::optional<ParticipantId> who, double residual, double tolerance) {
        checks.push_back({std::move(name), who, residual, tolerance, residual <= tolerance});
    }
};

}  // namespace watermarket
