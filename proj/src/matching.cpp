#include "url/matching.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace url {

namespace {

std::string pair_name(int i, int j) {
    std::ostringstream os;
    os << "(" << i << "," << j << ")";
    return os.str();
}

}  // namespace

PartialPermutation::PartialPermutation(int rows, int cols)
    : rows_(rows), cols_(cols), row_to_col_(static_cast<std::size_t>(rows), kUnmatched) {
    if (rows < 0 || cols < 0) throw ValidationError("partial permutation: negative shape");
}

PartialPermutation PartialPermutation::from_rows(int cols, std::vector<int> row_to_col) {
    PartialPermutation p(static_cast<int>(row_to_col.size()), cols);
    std::vector<bool> used(static_cast<std::size_t>(cols), false);
    for (std::size_t r = 0; r < row_to_col.size(); ++r) {
        const int c = row_to_col[r];
        if (c == kUnmatched) continue;
        if (c < 0 || c >= cols)
            throw ValidationError("partial permutation: column index out of range");
        if (used[static_cast<std::size_t>(c)])
            throw ValidationError("partial permutation: column used twice");
        used[static_cast<std::size_t>(c)] = true;
    }
    p.row_to_col_ = std::move(row_to_col);
    return p;
}

int PartialPermutation::row_of(int col) const {
    for (int r = 0; r < rows_; ++r)
        if (row_to_col_[static_cast<std::size_t>(r)] == col) return r;
    return kUnmatched;
}

int PartialPermutation::match_count() const {
    return static_cast<int>(std::count_if(row_to_col_.begin(), row_to_col_.end(),
                                          [](int c) { return c != kUnmatched; }));
}

PartialPermutation PartialPermutation::transposed() const {
    std::vector<int> t(static_cast<std::size_t>(cols_), kUnmatched);
    for (int r = 0; r < rows_; ++r) {
        const int c = row_to_col_[static_cast<std::size_t>(r)];
        if (c != kUnmatched) t[static_cast<std::size_t>(c)] = r;
    }
    return from_rows(rows_, std::move(t));
}

UniverseMatching::UniverseMatching(int universe_size, std::vector<int> assignment)
    : universe_size_(universe_size), assignment_(std::move(assignment)) {
    if (static_cast<int>(assignment_.size()) > universe_size_)
        throw ValidationError("universe matching: more rows than universe points");
    std::vector<bool> used(static_cast<std::size_t>(universe_size_), false);
    for (int c : assignment_) {
        if (c < 0 || c >= universe_size_)
            throw ValidationError("universe matching: column index out of range");
        if (used[static_cast<std::size_t>(c)])
            throw ValidationError("universe matching: column used twice");
        used[static_cast<std::size_t>(c)] = true;
    }
}

MatchingCollection::MatchingCollection(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    for (int m : sizes_)
        if (m < 0) throw ValidationError("matching collection: negative graph size");
}

void MatchingCollection::set_pair(int i, int j, PartialPermutation m) {
    if (i < 0 || i >= graph_count() || j < 0 || j >= graph_count())
        throw ValidationError("matching collection: pair index out of range");
    if (m.rows() != size_of(i) || m.cols() != size_of(j))
        throw ValidationError("matching collection: shape mismatch for pair " + pair_name(i, j));
    pairwise_.insert_or_assign({i, j}, std::move(m));
}

bool MatchingCollection::has_pair(int i, int j) const {
    return pairwise_.find({i, j}) != pairwise_.end();
}

const PartialPermutation& MatchingCollection::pair(int i, int j) const {
    auto it = pairwise_.find({i, j});
    if (it == pairwise_.end())
        throw ValidationError("matching collection: missing pair " + pair_name(i, j));
    return it->second;
}

MatchingCollection MatchingCollection::from_universe(
    const std::vector<UniverseMatching>& matchings) {
    std::vector<int> sizes;
    sizes.reserve(matchings.size());
    for (const auto& x : matchings) sizes.push_back(x.rows());
    MatchingCollection c(std::move(sizes));
    const int k = c.graph_count();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            c.set_pair(i, j, pairwise_from_universe(matchings[static_cast<std::size_t>(i)],
                                                    matchings[static_cast<std::size_t>(j)]));
    return c;
}

PartialPermutation pairwise_from_universe(const UniverseMatching& xi, const UniverseMatching& xj) {
    if (xi.universe_size() != xj.universe_size())
        throw ValidationError("pairwise_from_universe: universe size mismatch");
    std::vector<int> col_to_row_j(static_cast<std::size_t>(xj.universe_size()),
                                  PartialPermutation::kUnmatched);
    for (int b = 0; b < xj.rows(); ++b)
        col_to_row_j[static_cast<std::size_t>(xj.column_of(b))] = b;
    std::vector<int> rows(static_cast<std::size_t>(xi.rows()), PartialPermutation::kUnmatched);
    for (int a = 0; a < xi.rows(); ++a)
        rows[static_cast<std::size_t>(a)] = col_to_row_j[static_cast<std::size_t>(xi.column_of(a))];
    return PartialPermutation::from_rows(xj.rows(), std::move(rows));
}

ConsistencyReport check_cycle_consistency(const MatchingCollection& c) {
    const int k = c.graph_count();
    ConsistencyReport report;

    for (int i = 0; i < k; ++i) {
        const PartialPermutation& d = c.pair(i, i);
        bool identity = true;
        for (int a = 0; a < d.rows() && identity; ++a) identity = d.col_of(a) == a;
        if (!identity) report.identity_violations.push_back(i);
    }

    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (!(c.pair(i, j) == c.pair(j, i).transposed()))
                report.symmetry_violations.emplace_back(i, j);
        }
    }

    // X_ij X_jl <= X_il: if a->b in X_ij and b->c in X_jl then a->c in X_il.
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            for (int l = 0; l < k; ++l) {
                const PartialPermutation& xij = c.pair(i, j);
                const PartialPermutation& xjl = c.pair(j, l);
                const PartialPermutation& xil = c.pair(i, l);
                bool ok = true;
                for (int a = 0; a < xij.rows() && ok; ++a) {
                    const int b = xij.col_of(a);
                    if (b == PartialPermutation::kUnmatched) continue;
                    const int cc = xjl.col_of(b);
                    if (cc == PartialPermutation::kUnmatched) continue;
                    ok = xil.col_of(a) == cc;
                }
                if (!ok) report.transitivity_violations.emplace_back(i, j, l);
            }
        }
    }
    return report;
}

std::vector<UniverseMatching> factorize_pairwise(const MatchingCollection& c) {
    const int k = c.graph_count();
    std::vector<int> offset(static_cast<std::size_t>(k) + 1, 0);
    for (int i = 0; i < k; ++i) offset[static_cast<std::size_t>(i) + 1] =
        offset[static_cast<std::size_t>(i)] + c.size_of(i);
    const int total = offset[static_cast<std::size_t>(k)];

    std::vector<int> parent(static_cast<std::size_t>(total));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto unite = [&](int x, int y) {
        x = find(x);
        y = find(y);
        if (x != y) parent[static_cast<std::size_t>(std::max(x, y))] = std::min(x, y);
    };

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const PartialPermutation& x = c.pair(i, j);
            for (int a = 0; a < x.rows(); ++a) {
                const int b = x.col_of(a);
                if (b != PartialPermutation::kUnmatched)
                    unite(offset[static_cast<std::size_t>(i)] + a,
                          offset[static_cast<std::size_t>(j)] + b);
            }
        }
    }

    auto graph_of = [&](int node) {
        const int g =
            static_cast<int>(std::upper_bound(offset.begin(), offset.end(), node) - offset.begin()) - 1;
        return std::pair<int, int>{g, node - offset[static_cast<std::size_t>(g)]};
    };

    // Classes keyed by their root, which (with min-union) is also the smallest
    // global node index, so sorting roots yields the canonical column order.
    std::vector<int> roots;
    std::vector<int> column_of_root(static_cast<std::size_t>(total), -1);
    for (int n = 0; n < total; ++n)
        if (find(n) == n) roots.push_back(n);
    for (std::size_t col = 0; col < roots.size(); ++col)
        column_of_root[static_cast<std::size_t>(roots[col])] = static_cast<int>(col);

    // Two nodes of the same graph in one class cannot be factorized.
    std::vector<int> seen_node(roots.size() * static_cast<std::size_t>(k), -1);
    for (int n = 0; n < total; ++n) {
        const auto [g, a] = graph_of(n);
        const std::size_t slot =
            static_cast<std::size_t>(column_of_root[static_cast<std::size_t>(find(n))]) *
                static_cast<std::size_t>(k) +
            static_cast<std::size_t>(g);
        if (seen_node[slot] >= 0) {
            std::ostringstream os;
            os << "factorization error: match class contains nodes (" << g << ","
               << seen_node[slot] << ") and (" << g << "," << a << ") of the same graph; members:";
            for (int m = 0; m < total; ++m) {
                if (find(m) == find(n)) {
                    const auto [gg, aa] = graph_of(m);
                    os << " (" << gg << "," << aa << ")";
                }
            }
            throw ValidationError(os.str());
        }
        seen_node[slot] = a;
    }

    const int d = static_cast<int>(roots.size());
    std::vector<UniverseMatching> result;
    result.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        std::vector<int> assignment(static_cast<std::size_t>(c.size_of(i)));
        for (int a = 0; a < c.size_of(i); ++a)
            assignment[static_cast<std::size_t>(a)] =
                column_of_root[static_cast<std::size_t>(find(offset[static_cast<std::size_t>(i)] + a))];
        result.emplace_back(d, std::move(assignment));
    }

    // The construction is only valid for cycle-consistent input; re-expansion
    // must reproduce the pairwise set exactly.
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (!(pairwise_from_universe(result[static_cast<std::size_t>(i)],
                                         result[static_cast<std::size_t>(j)]) == c.pair(i, j)))
                throw ValidationError(
                    "factorization error: input pairwise matchings are not cycle-consistent at pair " +
                    pair_name(i, j));
    return result;
}

}  // namespace url
