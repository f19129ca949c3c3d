#include "url/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "url/assignment.hpp"
#include "url/errors.hpp"
#include "url/rng.hpp"

namespace url {

namespace {

// Stream ids namespaced away from the model-init and trainer streams.
constexpr std::uint64_t kAnchorStream = 1ULL << 32;
constexpr std::uint64_t kGraphStreamBase = (1ULL << 32) + 1;
constexpr std::uint64_t kTripleStream = 2ULL << 32;

constexpr double kPi = 3.14159265358979323846;

}  // namespace

void SynthConfig::validate() const {
    if (n_univ < 3) throw ValidationError("synth config: n_univ must be at least 3");
    if (p_vis < 0.0 || p_vis > 1.0) throw ValidationError("synth config: p_vis must be in [0,1]");
    if (sigma_feat < 0.0 || sigma_coo < 0.0)
        throw ValidationError("synth config: noise std must be non-negative");
    if (feat_dim <= 0) throw ValidationError("synth config: feat_dim must be positive");
    if (canvas <= 0.0) throw ValidationError("synth config: canvas must be positive");
    if (n_train < 0 || n_test < 0) throw ValidationError("synth config: negative split size");
    if (scale_min > scale_max || scale_min <= 0.0)
        throw ValidationError("synth config: invalid scale range");
    if (rot_max_deg < 0.0 || trans_max < 0.0)
        throw ValidationError("synth config: invalid affine range");
}

Anchor generate_anchor(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng = Rng::stream(seed, kAnchorStream);
    Anchor anchor;
    anchor.features = Tensor({config.n_univ, config.feat_dim});
    for (std::int64_t i = 0; i < anchor.features.size(); ++i)
        anchor.features[i] = rng.uniform(-1.0, 1.0);
    anchor.coords.reserve(static_cast<std::size_t>(config.n_univ));
    for (int i = 0; i < config.n_univ; ++i)
        anchor.coords.push_back({rng.uniform(0.0, config.canvas), rng.uniform(0.0, config.canvas)});
    return anchor;
}

Graph sample_graph(const Anchor& anchor, const SynthConfig& config, std::uint64_t seed,
                   std::uint64_t stream) {
    config.validate();
    if (anchor.features.dim(0) != config.n_univ || anchor.features.dim(1) != config.feat_dim)
        throw ValidationError("sample_graph: anchor does not match the configuration");
    Rng rng = Rng::stream(seed, kGraphStreamBase + stream);

    // Per-point Bernoulli visibility, resampled until at least 3 nodes
    // survive (Delaunay needs three points).
    std::vector<int> visible;
    do {
        visible.clear();
        for (int u = 0; u < config.n_univ; ++u)
            if (rng.bernoulli(config.p_vis)) visible.push_back(u);
    } while (static_cast<int>(visible.size()) < 3);
    const int m = static_cast<int>(visible.size());

    const double theta = rng.uniform(-config.rot_max_deg, config.rot_max_deg) * kPi / 180.0;
    const double scale = rng.uniform(config.scale_min, config.scale_max);
    const double tx = rng.uniform(-config.trans_max, config.trans_max);
    const double ty = rng.uniform(-config.trans_max, config.trans_max);
    const bool identity_affine = theta == 0.0 && scale == 1.0 && tx == 0.0 && ty == 0.0;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double cx = config.canvas / 2.0, cy = config.canvas / 2.0;

    Tensor features({m, config.feat_dim});
    std::vector<Point2> coords(static_cast<std::size_t>(m));
    for (int v = 0; v < m; ++v) {
        const int u = visible[static_cast<std::size_t>(v)];
        for (int j = 0; j < config.feat_dim; ++j)
            features.at(v, j) = anchor.features.at(u, j) + rng.gaussian(0.0, config.sigma_feat);
        const Point2& p = anchor.coords[static_cast<std::size_t>(u)];
        Point2 q = p;
        if (!identity_affine) {
            const double dx = p[0] - cx, dy = p[1] - cy;
            q = {scale * (cos_t * dx - sin_t * dy) + cx + tx,
                 scale * (sin_t * dx + cos_t * dy) + cy + ty};
        }
        coords[static_cast<std::size_t>(v)] = {q[0] + rng.gaussian(0.0, config.sigma_coo),
                                               q[1] + rng.gaussian(0.0, config.sigma_coo)};
    }
    return make_graph(std::move(coords), std::move(features), visible);
}

namespace {

struct PairCounts {
    std::int64_t tp = 0;
    std::int64_t pred = 0;
    std::int64_t gt = 0;
};

PairCounts count_pair(const PartialPermutation& pred, const PartialPermutation& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw ValidationError("f1: prediction and ground truth shapes differ");
    PairCounts c;
    c.pred = pred.match_count();
    c.gt = gt.match_count();
    for (int a = 0; a < pred.rows(); ++a) {
        const int b = pred.col_of(a);
        if (b != PartialPermutation::kUnmatched && gt.col_of(a) == b) ++c.tp;
    }
    return c;
}

F1Score scores_from_counts(const PairCounts& c) {
    F1Score s;
    if (c.pred == 0 && c.gt == 0) {
        s.precision = s.recall = s.f1 = 1.0;
        return s;
    }
    s.precision = c.pred > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.pred) : 0.0;
    s.recall = c.gt > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.gt) : 0.0;
    const double pr = s.precision + s.recall;
    s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    return s;
}

}  // namespace

F1Score f1_score(const std::vector<PartialPermutation>& predicted,
                 const std::vector<PartialPermutation>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw ValidationError("f1: pair count mismatch");
    PairCounts total;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        const PairCounts c = count_pair(predicted[p], ground_truth[p]);
        total.tp += c.tp;
        total.pred += c.pred;
        total.gt += c.gt;
    }
    return scores_from_counts(total);
}

double macro_f1_score(const std::vector<PartialPermutation>& predicted,
                      const std::vector<PartialPermutation>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw ValidationError("f1: pair count mismatch");
    if (predicted.empty()) return 1.0;
    double sum = 0.0;
    for (std::size_t p = 0; p < predicted.size(); ++p)
        sum += scores_from_counts(count_pair(predicted[p], ground_truth[p])).f1;
    return sum / static_cast<double>(predicted.size());
}

std::optional<std::pair<Graph, Graph>> intersection_filter(const Graph& gi, const Graph& gj) {
    if (!gi.labels || !gj.labels)
        throw ValidationError("intersection filter: both graphs must be labeled");
    const std::set<int> li(gi.labels->begin(), gi.labels->end());
    const std::set<int> lj(gj.labels->begin(), gj.labels->end());
    std::set<int> common;
    for (int l : li)
        if (lj.count(l)) common.insert(l);
    if (common.empty()) return std::nullopt;

    auto restrict_graph = [&](const Graph& g) {
        std::vector<Point2> coords;
        std::vector<int> labels;
        std::vector<int> rows;
        for (int v = 0; v < g.node_count; ++v) {
            if (!common.count((*g.labels)[static_cast<std::size_t>(v)])) continue;
            rows.push_back(v);
            coords.push_back(g.coords[static_cast<std::size_t>(v)]);
            labels.push_back((*g.labels)[static_cast<std::size_t>(v)]);
        }
        const std::int64_t f = g.features.dim(1);
        Tensor features({static_cast<std::int64_t>(rows.size()), f});
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::int64_t j = 0; j < f; ++j)
                features.at(static_cast<std::int64_t>(r), j) = g.features.at(rows[r], j);
        return make_graph(std::move(coords), std::move(features), std::move(labels));
    };
    return std::pair<Graph, Graph>{restrict_graph(gi), restrict_graph(gj)};
}

double accuracy(const std::vector<PartialPermutation>& predicted,
                const std::vector<PartialPermutation>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw ValidationError("accuracy: pair count mismatch");
    std::int64_t correct = 0, total = 0;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        const PartialPermutation& pred = predicted[p];
        const PartialPermutation& gt = ground_truth[p];
        if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
            throw ValidationError("accuracy: prediction and ground truth shapes differ");
        if (pred.rows() != pred.cols() || pred.match_count() != pred.rows() ||
            gt.match_count() != gt.rows())
            throw ValidationError("accuracy: matchings must be full permutations");
        for (int a = 0; a < pred.rows(); ++a) {
            if (pred.col_of(a) == gt.col_of(a)) ++correct;
            ++total;
        }
    }
    return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
}

namespace {

bool triple_fails(const MatchingCollection& c, int i, int j, int l) {
    const int idx[3] = {i, j, l};
    for (int a : idx) {
        const PartialPermutation& d = c.pair(a, a);
        for (int r = 0; r < d.rows(); ++r)
            if (d.col_of(r) != r) return true;
    }
    for (int a : idx)
        for (int b : idx)
            if (a < b && !(c.pair(a, b) == c.pair(b, a).transposed())) return true;
    for (int a : idx) {
        for (int b : idx) {
            for (int cc : idx) {
                const PartialPermutation& xab = c.pair(a, b);
                const PartialPermutation& xbc = c.pair(b, cc);
                const PartialPermutation& xac = c.pair(a, cc);
                for (int r = 0; r < xab.rows(); ++r) {
                    const int mid = xab.col_of(r);
                    if (mid == PartialPermutation::kUnmatched) continue;
                    const int end = xbc.col_of(mid);
                    if (end == PartialPermutation::kUnmatched) continue;
                    if (xac.col_of(r) != end) return true;
                }
            }
        }
    }
    return false;
}

}  // namespace

double violation_rate(const MatchingCollection& collection, int n_triples, std::uint64_t seed) {
    const int k = collection.graph_count();
    if (k == 0) return 0.0;
    if (k < 3) {
        // Degenerate multiset triples over the available indices.
        std::int64_t failures = 0, total = 0;
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j)
                for (int l = j; l < k; ++l) {
                    ++total;
                    if (triple_fails(collection, i, j, l)) ++failures;
                }
        return static_cast<double>(failures) / static_cast<double>(total);
    }

    const std::int64_t cube = static_cast<std::int64_t>(k) * k * k;
    if (cube <= n_triples) {
        std::int64_t failures = 0, total = 0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j)
                for (int l = j + 1; l < k; ++l) {
                    ++total;
                    if (triple_fails(collection, i, j, l)) ++failures;
                }
        return static_cast<double>(failures) / static_cast<double>(total);
    }

    Rng rng = Rng::stream(seed, kTripleStream);
    std::int64_t failures = 0;
    for (int t = 0; t < n_triples; ++t) {
        int idx[3];
        idx[0] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
        do {
            idx[1] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
        } while (idx[1] == idx[0]);
        do {
            idx[2] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
        } while (idx[2] == idx[0] || idx[2] == idx[1]);
        std::sort(idx, idx + 3);
        if (triple_fails(collection, idx[0], idx[1], idx[2])) ++failures;
    }
    return static_cast<double>(failures) / static_cast<double>(n_triples);
}

PartialPermutation pairwise_baseline_match(const Tensor& features_i, const Tensor& features_j,
                                           double threshold) {
    if (features_i.rank() != 2 || features_j.rank() != 2 ||
        features_i.dim(1) != features_j.dim(1))
        throw ValidationError("baseline match: feature dimension mismatch");
    const std::int64_t mi = features_i.dim(0), mj = features_j.dim(0), h = features_i.dim(1);

    auto similarity = [&](std::int64_t a, std::int64_t b) {
        double dot = 0.0;
        for (std::int64_t p = 0; p < h; ++p) dot += features_i.at(a, p) * features_j.at(b, p);
        return dot;
    };

    const bool flip = mi > mj;
    const std::int64_t rows = flip ? mj : mi;
    const std::int64_t cols = flip ? mi : mj;
    std::vector<double> values(static_cast<std::size_t>(rows * cols));
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
            values[static_cast<std::size_t>(r * cols + c)] =
                flip ? similarity(c, r) : similarity(r, c);

    const LapResult lap = solve_lap_auction(
        ScoreMatrix(static_cast<int>(rows), static_cast<int>(cols), std::move(values)));

    std::vector<int> row_to_col(static_cast<std::size_t>(mi), PartialPermutation::kUnmatched);
    for (int r = 0; r < static_cast<int>(rows); ++r) {
        const int c = lap.matching.column_of(r);
        const std::int64_t a = flip ? c : r;
        const std::int64_t b = flip ? r : c;
        if (similarity(a, b) < threshold) continue;
        row_to_col[static_cast<std::size_t>(a)] = static_cast<int>(b);
    }
    return PartialPermutation::from_rows(static_cast<int>(mj), std::move(row_to_col));
}

}  // namespace url
