#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP path and a serial
// reference path. The parallel path fills per-index slots and reduces them
// in index order, so both paths return bit-identical results.

#include <span>
#include <vector>

#include "watermarket/common_pool.hpp"

namespace watermarket::kernels {

enum class Execution {
    serial,
    parallel,
    automatic,  // parallel above a size threshold
};

/// Number of threads OpenMP would use; 1 when built without OpenMP.
[[nodiscard]] int max_threads() noexcept;

/// Clamped agricultural demand of every participant at price q.
void agricultural_demands(double q, std::span<const Participant> ps, const MarketConfig& cfg,
                          std::span<double> out, Execution exec = Execution::automatic);

/// sum_i w_ag,i(q) - W.
[[nodiscard]] double excess_demand(double q, std::span<const Participant> ps, const MarketConfig& cfg,
                                   Execution exec = Execution::automatic);

/// Row-major n x n matrix; entry (i, j) is participant i's utility gain over
/// autarky from a bilateral deal with j. The diagonal is zero.
[[nodiscard]] std::vector<double> gain_matrix(std::span<const Participant> ps, const MarketConfig& cfg,
                                              Execution exec = Execution::automatic);

/// Clears every market independently. Rethrows the first failure by index.
[[nodiscard]] std::vector<ClearingResult> clear_markets(std::span<const Market> markets,
                                                        ClearingMethod method = ClearingMethod::closed_form,
                                                        Execution exec = Execution::automatic);

}  // namespace watermarket::kernels
