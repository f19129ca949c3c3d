#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "url/tensor.hpp"

namespace url {

using Point2 = std::array<double, 2>;

// Sign of the orientation determinant for (a, b, c): +1 counterclockwise,
// -1 clockwise, 0 collinear. Exact: a filtered double evaluation falls back
// to rational arithmetic near zero.
int orient2d_sign(const Point2& a, const Point2& b, const Point2& c);

// Sign of the incircle determinant: +1 when p lies strictly inside the
// circumcircle of counterclockwise triangle (a, b, c), 0 when cocircular.
int incircle_sign(const Point2& a, const Point2& b, const Point2& c, const Point2& p);

// Undirected Delaunay edges (a < b, sorted). Degenerate inputs fall back to a
// nearest-neighbor chain along the dominant axis; cocircular quads resolve to
// the diagonal with the lexicographically smaller endpoint pair.
std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Point2>& points);

// Keypoint graph: coordinates, node features, optional ground-truth universe
// labels, and the Delaunay edge structure stored as directed edges (both
// directions) with relative-location attributes.
struct Graph {
    int node_count = 0;
    std::vector<Point2> coords;
    Tensor features;  // node_count x feature_dim
    std::optional<std::vector<int>> labels;
    std::vector<std::pair<int, int>> edges;  // directed (src, dst), lexicographically sorted
    std::vector<Point2> edge_attr;           // per directed edge: p_dst - p_src

    int feature_dim() const { return features.rank() == 2 ? static_cast<int>(features.dim(1)) : 0; }
    int directed_edge_count() const { return static_cast<int>(edges.size()); }
};

// Builds the graph: Delaunay edges from coords, symmetric closure, edge
// attributes. Labels (if given) must be distinct within the graph.
Graph make_graph(std::vector<Point2> coords, Tensor features,
                 std::optional<std::vector<int>> labels = std::nullopt);

// Per-directed-edge pseudo-coordinates in [0,1]^D for the spline kernels.
struct PseudoCoords {
    int dims = 0;
    std::vector<double> values;  // edge-major, `dims` entries per edge

    double at(int edge, int d) const {
        return values[static_cast<std::size_t>(edge) * static_cast<std::size_t>(dims) +
                      static_cast<std::size_t>(d)];
    }
};

// Graph-local normalization scale: max over directed edges of the
// infinity-norm of the 2D offset; 1 if there are no edges or all offsets are
// zero.
double pseudo_scale(const Graph& graph);

// u = clamp(delta / (2R) + 0.5, 0, 1) per component; the optional per-node z
// adds a third component (z_dst - z_src, clamped with the same 2D-derived R).
PseudoCoords pseudo_coords(const Graph& graph, const std::vector<double>* z = nullptr);

}  // namespace url
