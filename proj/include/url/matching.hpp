#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "url/errors.hpp"

namespace url {

// Binary m x n matrix with at most one 1 per row and per column, stored as a
// per-row column index (-1 for an unmatched row). Column injectivity is
// enforced at construction.
class PartialPermutation {
public:
    static constexpr int kUnmatched = -1;

    PartialPermutation(int rows, int cols);
    static PartialPermutation from_rows(int cols, std::vector<int> row_to_col);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    // Column matched to `row`, or kUnmatched.
    int col_of(int row) const { return row_to_col_[static_cast<std::size_t>(row)]; }
    // Row matched to `col`, or kUnmatched.
    int row_of(int col) const;

    int match_count() const;
    PartialPermutation transposed() const;

    bool operator==(const PartialPermutation& other) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_to_col_;
};

// Binary m x d matrix with exactly one 1 per row and at most one per column:
// every node is assigned one universe point, injectively.
class UniverseMatching {
public:
    UniverseMatching(int universe_size, std::vector<int> assignment);

    int rows() const { return static_cast<int>(assignment_.size()); }
    int universe_size() const { return universe_size_; }
    int column_of(int row) const { return assignment_[static_cast<std::size_t>(row)]; }
    const std::vector<int>& assignment() const { return assignment_; }

    bool operator==(const UniverseMatching& other) const = default;

private:
    int universe_size_ = 0;
    std::vector<int> assignment_;
};

// Complete set of pairwise matchings over k graphs, keyed by ordered pair
// (i, j) including the diagonal.
class MatchingCollection {
public:
    explicit MatchingCollection(std::vector<int> sizes);

    int graph_count() const { return static_cast<int>(sizes_.size()); }
    int size_of(int i) const { return sizes_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& sizes() const { return sizes_; }

    void set_pair(int i, int j, PartialPermutation m);
    bool has_pair(int i, int j) const;
    const PartialPermutation& pair(int i, int j) const;  // throws if missing

    // Collection induced by universe matchings; cycle-consistent by construction.
    static MatchingCollection from_universe(const std::vector<UniverseMatching>& matchings);

private:
    std::vector<int> sizes_;
    std::map<std::pair<int, int>, PartialPermutation> pairwise_;
};

struct ConsistencyReport {
    std::vector<int> identity_violations;                        // graph index
    std::vector<std::pair<int, int>> symmetry_violations;        // (i, j), i < j
    std::vector<std::tuple<int, int, int>> transitivity_violations;  // ordered (i, j, l)

    bool is_consistent() const {
        return identity_violations.empty() && symmetry_violations.empty() &&
               transitivity_violations.empty();
    }
};

// X_ij = X_i X_j^T: rows of Xi and Xj mapping to the same universe column match.
PartialPermutation pairwise_from_universe(const UniverseMatching& xi, const UniverseMatching& xj);

// Checks Identity (X_ii = I), Symmetry (X_ij = X_ji^T) and Partial
// Transitivity (X_ij X_jl <= X_il, elementwise) over all index triples.
ConsistencyReport check_cycle_consistency(const MatchingCollection& collection);

// Recovers object-to-universe matchings from a cycle-consistent pairwise set
// via connected components of the union of match edges. The universe size is
// the number of match classes; columns are ordered by each class's smallest
// (graph, node) member.
std::vector<UniverseMatching> factorize_pairwise(const MatchingCollection& collection);

}  // namespace url
