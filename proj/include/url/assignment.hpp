#pragma once

#include <vector>

#include "url/matching.hpp"

namespace url {

// Similarity scores (higher is better) for assigning m rows to d >= m columns.
class ScoreMatrix {
public:
    ScoreMatrix(int rows, int cols, std::vector<double> values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double at(int r, int c) const {
        return values_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
                       static_cast<std::size_t>(c)];
    }
    const std::vector<double>& values() const { return values_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> values_;
};

struct LapResult {
    UniverseMatching matching;
    double objective = 0.0;
};

struct ExactLapResult {
    UniverseMatching matching;
    double objective = 0.0;
    // Best objective over all other assignments; -inf when the assignment is
    // the only feasible one. objective - runner_up is the uniqueness margin.
    double runner_up = 0.0;
};

// Default epsilon-scaling schedule: eps_t = eps0 / 4^t with eps0 = max|S|,
// down to a final eps = granularity / (m + 1).
std::vector<double> auction_epsilon_schedule(const ScoreMatrix& scores,
                                             double granularity = 1e-9);

// Forward auction maximizing <X, S> over object-to-universe matchings.
LapResult solve_lap_auction(const ScoreMatrix& scores,
                            const std::vector<double>& epsilon_schedule);
LapResult solve_lap_auction(const ScoreMatrix& scores);

// Exhaustive oracle over all injective row->column maps; requires d <= 10.
// Ties broken toward the lexicographically smallest column vector.
ExactLapResult solve_lap_exact(const ScoreMatrix& scores);

}  // namespace url
