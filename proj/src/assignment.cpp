#include "url/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "url/errors.hpp"

namespace url {

ScoreMatrix::ScoreMatrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows < 0 || cols < 0) throw ValidationError("score matrix: negative shape");
    if (values_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw ValidationError("score matrix: value count does not match shape");
    for (double v : values_)
        if (!std::isfinite(v)) throw ValidationError("score matrix: non-finite entry");
}

std::vector<double> auction_epsilon_schedule(const ScoreMatrix& scores, double granularity) {
    if (granularity <= 0.0) throw ValidationError("auction: granularity must be positive");
    const double eps_final = granularity / (scores.rows() + 1);
    double eps0 = 0.0;
    for (double v : scores.values()) eps0 = std::max(eps0, std::abs(v));
    std::vector<double> schedule;
    for (double eps = eps0; eps > eps_final; eps /= 4.0) schedule.push_back(eps);
    schedule.push_back(eps_final);
    return schedule;
}

LapResult solve_lap_auction(const ScoreMatrix& scores, const std::vector<double>& schedule) {
    const int m = scores.rows();
    const int d = scores.cols();
    if (m > d) throw ValidationError("auction: more rows than columns (infeasible)");
    if (schedule.empty()) throw ValidationError("auction: empty epsilon schedule");
    for (std::size_t t = 0; t < schedule.size(); ++t) {
        if (schedule[t] <= 0.0) throw ValidationError("auction: epsilon must be positive");
        if (t > 0 && schedule[t] > schedule[t - 1])
            throw ValidationError("auction: epsilon schedule must be descending");
    }
    if (m == 0) return {UniverseMatching(d, {}), 0.0};

    // Price scaling with persistent prices is only valid on square problems:
    // a stale positive price on a column that ends a round unassigned breaks
    // the eps-complementary-slackness optimality bound. Rectangular inputs
    // are squared with zero-score virtual bidders, which shifts every
    // completion's objective by the same constant. The effective final eps is
    // tightened so the optimality granularity of the given schedule carries
    // over to the d-bidder problem.
    const int n = d;
    auto score_at = [&](int i, int j) {
        return i < m ? scores.at(i, j) : 0.0;
    };
    const double eps_final =
        schedule.back() * (static_cast<double>(m) + 1.0) / (static_cast<double>(d) + 1.0);

    std::vector<double> price(static_cast<std::size_t>(d), 0.0);
    std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
    std::vector<int> row_of_col(static_cast<std::size_t>(d), -1);

    auto run_round = [&](double eps) {
        std::fill(col_of_row.begin(), col_of_row.end(), -1);
        std::fill(row_of_col.begin(), row_of_col.end(), -1);
        std::deque<int> unassigned;
        for (int i = 0; i < n; ++i) unassigned.push_back(i);

        while (!unassigned.empty()) {
            const int i = unassigned.front();
            unassigned.pop_front();

            int best_j = 0;
            double best = -std::numeric_limits<double>::infinity();
            double second = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < d; ++j) {
                const double v = score_at(i, j) - price[static_cast<std::size_t>(j)];
                if (v > best) {
                    second = best;
                    best = v;
                    best_j = j;
                } else if (v > second) {
                    second = v;
                }
            }
            if (d == 1) second = best;  // sole column: bump only by eps

            price[static_cast<std::size_t>(best_j)] += best - second + eps;
            const int previous = row_of_col[static_cast<std::size_t>(best_j)];
            if (previous >= 0) {
                col_of_row[static_cast<std::size_t>(previous)] = -1;
                unassigned.push_back(previous);
            }
            row_of_col[static_cast<std::size_t>(best_j)] = i;
            col_of_row[static_cast<std::size_t>(i)] = best_j;
        }
    };

    for (double eps : schedule) run_round(eps);
    for (double eps = schedule.back() / 4.0; eps > eps_final; eps /= 4.0) run_round(eps);
    if (m < d) run_round(eps_final);

    double objective = 0.0;
    std::vector<int> assignment(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        assignment[static_cast<std::size_t>(i)] = col_of_row[static_cast<std::size_t>(i)];
        objective += scores.at(i, col_of_row[static_cast<std::size_t>(i)]);
    }
    return {UniverseMatching(d, std::move(assignment)), objective};
}

LapResult solve_lap_auction(const ScoreMatrix& scores) {
    return solve_lap_auction(scores, auction_epsilon_schedule(scores));
}

ExactLapResult solve_lap_exact(const ScoreMatrix& scores) {
    const int m = scores.rows();
    const int d = scores.cols();
    if (m > d) throw ValidationError("exact lap: more rows than columns (infeasible)");
    if (d > 10) throw ValidationError("exact lap: universe size exceeds enumeration limit (10)");
    if (m == 0) {
        return {UniverseMatching(d, {}), 0.0, -std::numeric_limits<double>::infinity()};
    }

    std::vector<int> current(static_cast<std::size_t>(m), -1);
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    std::vector<int> best_assignment;
    double best = -std::numeric_limits<double>::infinity();
    double runner_up = -std::numeric_limits<double>::infinity();

    // Depth-first in column order, so the first assignment reaching the
    // maximum is the lexicographically smallest one.
    auto recurse = [&](auto&& self, int row, double acc) -> void {
        if (row == m) {
            if (acc > best) {
                runner_up = best;
                best = acc;
                best_assignment = current;
            } else if (acc > runner_up) {
                runner_up = acc;
            }
            return;
        }
        for (int c = 0; c < d; ++c) {
            if (used[static_cast<std::size_t>(c)]) continue;
            used[static_cast<std::size_t>(c)] = true;
            current[static_cast<std::size_t>(row)] = c;
            self(self, row + 1, acc + scores.at(row, c));
            used[static_cast<std::size_t>(c)] = false;
        }
    };
    recurse(recurse, 0, 0.0);

    return {UniverseMatching(d, std::move(best_assignment)), best, runner_up};
}

}  // namespace url
