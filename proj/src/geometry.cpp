#include "url/geometry.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <set>
#include <unordered_map>

#include "url/errors.hpp"

namespace url {

namespace {

// ---------------------------------------------------------------------------
// Predicates: adaptive filter on the double evaluation, exact rational
// arithmetic when the determinant magnitude falls below the error bound.
// ---------------------------------------------------------------------------

constexpr double kEps = 1.1102230246251565e-16;  // 2^-53
constexpr double kCcwErrBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleErrBound = (10.0 + 96.0 * kEps) * kEps;

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

int orient2d_exact(const Point2& a, const Point2& b, const Point2& c) {
    const mpq_class ax(a[0]), ay(a[1]), bx(b[0]), by(b[1]), cx(c[0]), cy(c[1]);
    const mpq_class det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    return sgn(det);
}

int incircle_exact(const Point2& a, const Point2& b, const Point2& c, const Point2& p) {
    const mpq_class adx = mpq_class(a[0]) - mpq_class(p[0]);
    const mpq_class ady = mpq_class(a[1]) - mpq_class(p[1]);
    const mpq_class bdx = mpq_class(b[0]) - mpq_class(p[0]);
    const mpq_class bdy = mpq_class(b[1]) - mpq_class(p[1]);
    const mpq_class cdx = mpq_class(c[0]) - mpq_class(p[0]);
    const mpq_class cdy = mpq_class(c[1]) - mpq_class(p[1]);
    const mpq_class alift = adx * adx + ady * ady;
    const mpq_class blift = bdx * bdx + bdy * bdy;
    const mpq_class clift = cdx * cdx + cdy * cdy;
    const mpq_class det = alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) +
                          clift * (adx * bdy - ady * bdx);
    return sgn(det);
}

}  // namespace

int orient2d_sign(const Point2& a, const Point2& b, const Point2& c) {
    const double detleft = (b[0] - a[0]) * (c[1] - a[1]);
    const double detright = (b[1] - a[1]) * (c[0] - a[0]);
    const double det = detleft - detright;
    const double detsum = std::abs(detleft) + std::abs(detright);
    if (std::abs(det) > kCcwErrBound * detsum) return sign_of(det);
    if (detsum == 0.0) return 0;
    return orient2d_exact(a, b, c);
}

int incircle_sign(const Point2& a, const Point2& b, const Point2& c, const Point2& p) {
    const double adx = a[0] - p[0], ady = a[1] - p[1];
    const double bdx = b[0] - p[0], bdy = b[1] - p[1];
    const double cdx = c[0] - p[0], cdy = c[1] - p[1];
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;
    const double det = alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) +
                       clift * (adx * bdy - ady * bdx);
    const double permanent = alift * (std::abs(bdx * cdy) + std::abs(bdy * cdx)) +
                             blift * (std::abs(cdx * ady) + std::abs(cdy * adx)) +
                             clift * (std::abs(adx * bdy) + std::abs(ady * bdx));
    if (std::abs(det) > kIncircleErrBound * permanent) return sign_of(det);
    if (permanent == 0.0) return 0;
    return incircle_exact(a, b, c, p);
}

namespace {

// ---------------------------------------------------------------------------
// Incremental triangulation (lexicographic insertion) + Lawson flips.
// ---------------------------------------------------------------------------

std::uint64_t edge_key(int u, int v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
}

struct Triangulator {
    const std::vector<Point2>& pts;

    struct Tri {
        int v[3];
        bool alive = true;
    };
    std::vector<Tri> tris;
    std::unordered_map<std::uint64_t, std::array<int, 2>> edge_tris;

    explicit Triangulator(const std::vector<Point2>& points) : pts(points) {}

    void register_edge(int u, int v, int tri) {
        auto& slots = edge_tris.try_emplace(edge_key(u, v), std::array<int, 2>{-1, -1}).first->second;
        if (slots[0] < 0)
            slots[0] = tri;
        else if (slots[1] < 0)
            slots[1] = tri;
        else
            throw NumericError("delaunay: edge shared by more than two triangles");
    }

    void unregister_edge(int u, int v, int tri) {
        auto it = edge_tris.find(edge_key(u, v));
        auto& slots = it->second;
        if (slots[0] == tri)
            slots[0] = slots[1];
        slots[1] = -1;
        if (slots[0] < 0) edge_tris.erase(it);
    }

    int add_tri(int a, int b, int c) {
        if (orient2d_sign(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)],
                          pts[static_cast<std::size_t>(c)]) < 0)
            std::swap(b, c);
        const int id = static_cast<int>(tris.size());
        tris.push_back(Tri{{a, b, c}, true});
        register_edge(a, b, id);
        register_edge(b, c, id);
        register_edge(c, a, id);
        return id;
    }

    void remove_tri(int id) {
        Tri& t = tris[static_cast<std::size_t>(id)];
        t.alive = false;
        unregister_edge(t.v[0], t.v[1], id);
        unregister_edge(t.v[1], t.v[2], id);
        unregister_edge(t.v[2], t.v[0], id);
    }

    int opposite_vertex(int tri, int u, int v) const {
        for (int w : tris[static_cast<std::size_t>(tri)].v)
            if (w != u && w != v) return w;
        throw NumericError("delaunay: degenerate triangle");
    }

    // Flips edge (u, v) shared by two triangles to the cross diagonal.
    // Returns the new diagonal endpoints.
    std::pair<int, int> flip(int u, int v) {
        const auto slots = edge_tris.at(edge_key(u, v));
        const int p = opposite_vertex(slots[0], u, v);
        const int q = opposite_vertex(slots[1], u, v);
        remove_tri(slots[0]);
        remove_tri(slots[1]);
        add_tri(u, q, p);
        add_tri(v, p, q);
        return {p, q};
    }

    // True when the edge is interior and its quad is strictly convex, hence
    // flippable; outputs the opposite vertices.
    bool flippable(int u, int v, int& p, int& q) const {
        auto it = edge_tris.find(edge_key(u, v));
        if (it == edge_tris.end() || it->second[1] < 0) return false;
        p = opposite_vertex(it->second[0], u, v);
        q = opposite_vertex(it->second[1], u, v);
        const int s1 = orient2d_sign(pts[static_cast<std::size_t>(p)], pts[static_cast<std::size_t>(q)],
                                     pts[static_cast<std::size_t>(u)]);
        const int s2 = orient2d_sign(pts[static_cast<std::size_t>(p)], pts[static_cast<std::size_t>(q)],
                                     pts[static_cast<std::size_t>(v)]);
        return s1 * s2 < 0;
    }

    // Strictly-inside-circumcircle test for the quad across edge (u, v).
    int incircle_across(int u, int v, int q) const {
        const auto slots = edge_tris.at(edge_key(u, v));
        const Tri& t = tris[static_cast<std::size_t>(slots[0])];
        return incircle_sign(pts[static_cast<std::size_t>(t.v[0])],
                             pts[static_cast<std::size_t>(t.v[1])],
                             pts[static_cast<std::size_t>(t.v[2])],
                             pts[static_cast<std::size_t>(q)]);
    }

    void lawson() {
        std::deque<std::pair<int, int>> queue;
        std::set<std::uint64_t> queued;
        for (const auto& [key, slots] : edge_tris) {
            (void)slots;
            queue.emplace_back(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu));
            queued.insert(key);
        }
        std::size_t guard = 40 * pts.size() * pts.size() + 4096;
        while (!queue.empty()) {
            if (guard-- == 0) throw NumericError("delaunay: flip loop exceeded bound");
            const auto [u, v] = queue.front();
            queue.pop_front();
            queued.erase(edge_key(u, v));
            int p, q;
            if (!flippable(u, v, p, q)) continue;
            if (incircle_across(u, v, q) <= 0) continue;
            flip(u, v);
            for (auto [x, y] : {std::pair{u, q}, {q, v}, {v, p}, {p, u}}) {
                const std::uint64_t k = edge_key(x, y);
                if (queued.insert(k).second) queue.emplace_back(x, y);
            }
        }
    }

    // Exactly cocircular quads get the diagonal with the lexicographically
    // smaller endpoint pair (compared in `order`, the caller's index space).
    void normalize_cocircular(const std::vector<int>& order) {
        auto canonical = [&](int a, int b) {
            int oa = order[static_cast<std::size_t>(a)];
            int ob = order[static_cast<std::size_t>(b)];
            if (oa > ob) std::swap(oa, ob);
            return std::pair<int, int>{oa, ob};
        };
        bool changed = true;
        std::size_t guard = 4 * pts.size() * pts.size() + 1024;
        while (changed) {
            if (guard-- == 0) throw NumericError("delaunay: cocircular normalization exceeded bound");
            changed = false;
            std::vector<std::pair<int, int>> interior;
            for (const auto& [key, slots] : edge_tris)
                if (slots[1] >= 0)
                    interior.emplace_back(static_cast<int>(key >> 32),
                                          static_cast<int>(key & 0xffffffffu));
            for (auto [u, v] : interior) {
                int p, q;
                if (!flippable(u, v, p, q)) continue;
                if (incircle_across(u, v, q) != 0) continue;
                if (canonical(p, q) < canonical(u, v)) {
                    flip(u, v);
                    changed = true;
                }
            }
        }
    }
};

std::vector<std::pair<int, int>> chain_fallback(const std::vector<Point2>& points) {
    const int m = static_cast<int>(points.size());
    std::vector<std::pair<int, int>> edges;
    if (m < 2) return edges;
    double min_x = points[0][0], max_x = points[0][0];
    double min_y = points[0][1], max_y = points[0][1];
    for (const Point2& p : points) {
        min_x = std::min(min_x, p[0]);
        max_x = std::max(max_x, p[0]);
        min_y = std::min(min_y, p[1]);
        max_y = std::max(max_y, p[1]);
    }
    const int axis = (max_x - min_x >= max_y - min_y) ? 0 : 1;
    std::vector<int> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Point2& pa = points[static_cast<std::size_t>(a)];
        const Point2& pb = points[static_cast<std::size_t>(b)];
        if (pa[axis] != pb[axis]) return pa[axis] < pb[axis];
        if (pa[1 - axis] != pb[1 - axis]) return pa[1 - axis] < pb[1 - axis];
        return a < b;
    });
    for (int i = 0; i + 1 < m; ++i) {
        int a = order[static_cast<std::size_t>(i)];
        int b = order[static_cast<std::size_t>(i) + 1];
        if (a > b) std::swap(a, b);
        edges.emplace_back(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

}  // namespace

std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Point2>& points) {
    const int m = static_cast<int>(points.size());
    for (const Point2& p : points)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
            throw ValidationError("delaunay: non-finite coordinate");
    if (m <= 1) return {};
    if (m == 2) return {{0, 1}};

    // Sorted unique working set; exact duplicates collapse onto their first
    // occurrence and inherit its edges.
    std::vector<int> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Point2& pa = points[static_cast<std::size_t>(a)];
        const Point2& pb = points[static_cast<std::size_t>(b)];
        if (pa[0] != pb[0]) return pa[0] < pb[0];
        if (pa[1] != pb[1]) return pa[1] < pb[1];
        return a < b;
    });
    std::vector<Point2> work;
    std::vector<int> original;  // work index -> original index
    for (int idx : order) {
        const Point2& p = points[static_cast<std::size_t>(idx)];
        if (!work.empty() && work.back() == p) continue;
        work.push_back(p);
        original.push_back(idx);
    }
    const int n = static_cast<int>(work.size());

    bool collinear = true;
    for (int i = 2; i < n && collinear; ++i)
        collinear = orient2d_sign(work[0], work[1], work[static_cast<std::size_t>(i)]) == 0;
    if (n < 3 || collinear) return chain_fallback(points);

    Triangulator tr(work);
    std::vector<int> hull;  // counterclockwise vertex ring (work indices)

    int first_bend = 2;
    while (orient2d_sign(work[0], work[1], work[static_cast<std::size_t>(first_bend)]) == 0)
        ++first_bend;
    // Fan the collinear prefix from the first bend point.
    for (int i = 0; i + 1 < first_bend; ++i) tr.add_tri(i, i + 1, first_bend);
    if (orient2d_sign(work[0], work[static_cast<std::size_t>(first_bend) - 1],
                      work[static_cast<std::size_t>(first_bend)]) > 0) {
        for (int i = 0; i < first_bend; ++i) hull.push_back(i);
        hull.push_back(first_bend);
    } else {
        for (int i = first_bend - 1; i >= 0; --i) hull.push_back(i);
        hull.push_back(first_bend);
    }

    for (int next = first_bend + 1; next < n; ++next) {
        const Point2& p = work[static_cast<std::size_t>(next)];
        const int h = static_cast<int>(hull.size());
        std::vector<bool> visible(static_cast<std::size_t>(h), false);
        int strict_count = 0;
        for (int e = 0; e < h; ++e) {
            const Point2& a = work[static_cast<std::size_t>(hull[static_cast<std::size_t>(e)])];
            const Point2& b =
                work[static_cast<std::size_t>(hull[static_cast<std::size_t>((e + 1) % h)])];
            if (orient2d_sign(a, b, p) < 0) {
                visible[static_cast<std::size_t>(e)] = true;
                ++strict_count;
            }
        }
        if (strict_count == 0 || strict_count == h)
            throw NumericError("delaunay: inconsistent hull visibility for a new point");

        // The visible edges form one contiguous arc; rotate to start behind it.
        int start = 0;
        while (visible[static_cast<std::size_t>(start)]) ++start;
        int arc_begin = -1, arc_len = 0;
        for (int s = 0; s < h; ++s) {
            const int e = (start + s) % h;
            if (visible[static_cast<std::size_t>(e)]) {
                if (arc_begin < 0) arc_begin = e;
                ++arc_len;
            } else if (arc_begin >= 0 && arc_len < strict_count) {
                throw NumericError("delaunay: visible hull edges are not contiguous");
            }
        }

        for (int s = 0; s < arc_len; ++s) {
            const int e = (arc_begin + s) % h;
            tr.add_tri(hull[static_cast<std::size_t>(e)],
                       hull[static_cast<std::size_t>((e + 1) % h)], next);
        }
        std::vector<int> new_hull;
        new_hull.reserve(hull.size() + 1);
        // Keep vertices from the arc end to the arc start, then insert p.
        const int keep_from = (arc_begin + arc_len) % h;
        for (int s = 0; s <= h - arc_len; ++s)
            new_hull.push_back(hull[static_cast<std::size_t>((keep_from + s) % h)]);
        new_hull.push_back(next);
        hull = std::move(new_hull);
    }

    tr.lawson();
    tr.normalize_cocircular(original);

    std::set<std::pair<int, int>> edge_set;
    for (const auto& t : tr.tris) {
        if (!t.alive) continue;
        for (auto [x, y] : {std::pair{t.v[0], t.v[1]}, {t.v[1], t.v[2]}, {t.v[2], t.v[0]}}) {
            int a = original[static_cast<std::size_t>(x)];
            int b = original[static_cast<std::size_t>(y)];
            if (a > b) std::swap(a, b);
            edge_set.emplace(a, b);
        }
    }
    return {edge_set.begin(), edge_set.end()};
}

Graph make_graph(std::vector<Point2> coords, Tensor features, std::optional<std::vector<int>> labels) {
    Graph g;
    g.node_count = static_cast<int>(coords.size());
    if (features.rank() != 2 || features.dim(0) != g.node_count)
        throw ValidationError("graph: feature matrix must have one row per node");
    if (labels) {
        if (static_cast<int>(labels->size()) != g.node_count)
            throw ValidationError("graph: label count must match node count");
        std::set<int> distinct(labels->begin(), labels->end());
        if (static_cast<int>(distinct.size()) != g.node_count)
            throw ValidationError("graph: labels must be distinct within a graph");
        for (int l : *labels)
            if (l < 0) throw ValidationError("graph: negative label");
    }
    g.coords = std::move(coords);
    g.features = std::move(features);
    g.labels = std::move(labels);

    for (auto [a, b] : delaunay_edges(g.coords)) {
        g.edges.emplace_back(a, b);
        g.edges.emplace_back(b, a);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edge_attr.reserve(g.edges.size());
    for (auto [src, dst] : g.edges)
        g.edge_attr.push_back({g.coords[static_cast<std::size_t>(dst)][0] -
                                   g.coords[static_cast<std::size_t>(src)][0],
                               g.coords[static_cast<std::size_t>(dst)][1] -
                                   g.coords[static_cast<std::size_t>(src)][1]});
    return g;
}

double pseudo_scale(const Graph& graph) {
    double r = 0.0;
    for (const Point2& d : graph.edge_attr) r = std::max({r, std::abs(d[0]), std::abs(d[1])});
    return r > 0.0 ? r : 1.0;
}

PseudoCoords pseudo_coords(const Graph& graph, const std::vector<double>* z) {
    if (z != nullptr && static_cast<int>(z->size()) != graph.node_count)
        throw ValidationError("pseudo_coords: z length must match node count");
    const int dims = z != nullptr ? 3 : 2;
    const double r = pseudo_scale(graph);
    const double inv = 1.0 / (2.0 * r);

    PseudoCoords pc;
    pc.dims = dims;
    pc.values.reserve(graph.edge_attr.size() * static_cast<std::size_t>(dims));
    auto squash = [&](double delta) { return std::clamp(delta * inv + 0.5, 0.0, 1.0); };
    for (std::size_t e = 0; e < graph.edge_attr.size(); ++e) {
        pc.values.push_back(squash(graph.edge_attr[e][0]));
        pc.values.push_back(squash(graph.edge_attr[e][1]));
        if (z != nullptr) {
            const auto [src, dst] = graph.edges[e];
            pc.values.push_back(squash((*z)[static_cast<std::size_t>(dst)] -
                                       (*z)[static_cast<std::size_t>(src)]));
        }
    }
    return pc;
}

}  // namespace url
