#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "url/assignment.hpp"
#include "url/geometry.hpp"
#include "url/matching.hpp"
#include "url/tape.hpp"
#include "url/tensor.hpp"

namespace url {

struct EncoderConfig {
    int input_dim = 1024;
    int hidden_dim = 64;
    int spline_layers_2d = 2;
    int spline_layers_3d = 1;
    int kernel_knots = 5;   // per pseudo-coordinate dimension
    int mlp_z_hidden = 32;
    double dropout_rate = 0.35;
    double label_smoothing = 0.4;
    int universe_size = 0;

    void validate() const;
};

// Row-stochastic node-to-universe probabilities.
struct SoftMatching {
    Tensor values;  // m x d

    explicit SoftMatching(Tensor values);
    int rows() const { return static_cast<int>(values.dim(0)); }
    int universe_size() const { return static_cast<int>(values.dim(1)); }
};

// Fixed per (graph, layer dimensionality): adjacency in CSR-by-source form and
// the active hat-basis combinations of the 2D pseudo-coordinates.
struct SplineGeometry {
    int node_count = 0;
    int knots = 0;
    std::vector<int> row_ptr;    // size node_count + 1
    std::vector<int> neighbor;   // dst per directed edge, CSR order
    std::vector<double> inv_degree;
    std::vector<int> combo_ptr;  // per edge, offsets into combo arrays
    std::vector<int> combo_g2;   // flat 2D basis index gx * knots + gy
    std::vector<double> combo_w; // product of the two hat weights (nonzero)
    double inv_2r = 0.5;         // z squash slope, from the 2D scale only

    static SplineGeometry build(const Graph& graph, int knots);
};

// Tape handles for every model parameter.
struct ParamVars {
    Var input_w, input_b;
    struct ConvVars {
        Var kernel, root, bias;
    };
    std::vector<ConvVars> conv2d;
    Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    std::vector<ConvVars> conv3d;
    Var universe;

    static ParamVars bind(Tape& tape, const ParamStore& store, const EncoderConfig& config,
                          bool with_grad);
};

// Supplies pre-sampled dropout masks during training; null disables dropout.
using DropoutSampler = std::function<Tensor(const std::vector<std::int64_t>& shape)>;

// Edge-conditioned convolution: out(v) = W_root f(v) + b
//   + (1/max(1,|N(v)|)) sum_w K(u_{v->w}) f(w), followed by ReLU (and dropout
// when a sampler is given). K interpolates the kernel tensor with degree-1
// hat bases; with `z` present the third pseudo-coordinate is derived from z
// and gradients flow back into it.
Var spline_conv(Tape& tape, std::shared_ptr<const SplineGeometry> geo, Var x, Var kernel,
                Var root, Var bias, std::optional<Var> z, const DropoutSampler& dropout,
                double dropout_rate);

// ẑ_v = w2 relu(W1 f_v + b1) + b2.
Var lift_virtual_coordinate(Tape& tape, const ParamVars& params, Var features);

struct EncodeVars {
    Var features;  // m x h
    Var lifted_z;  // m x 1
};

// Full encoder pipeline: input projection, 2D spline blocks, virtual
// coordinate lift, 3D spline blocks.
EncodeVars encode_on_tape(Tape& tape, const ParamVars& params, const EncoderConfig& config,
                          const Graph& graph, const DropoutSampler& dropout = nullptr);

// Row softmax of F Û^T on the tape.
Var soft_matching_on_tape(Tape& tape, Var features, Var universe);

// Mean per-node cross entropy against smoothed one-hot targets.
Var node_loss_on_tape(Tape& tape, Var soft, const UniverseMatching& gt, double label_smoothing);

// Sum of per-graph losses over a batch; optionally exposes each graph's soft
// matching values for metric computation.
Var total_loss_on_tape(Tape& tape, const ParamVars& params, const EncoderConfig& config,
                       const std::vector<const Graph*>& batch, const DropoutSampler& dropout = nullptr,
                       std::vector<Tensor>* soft_out = nullptr);

// --- evaluation-mode entry points (frozen parameters, no dropout) ---

struct EncodeResult {
    Tensor features;                // m x h
    std::vector<double> lifted_z;   // m
};

EncodeResult encode(const ParamStore& store, const EncoderConfig& config, const Graph& graph);

SoftMatching soft_matching(const Tensor& features, const Tensor& universe);

double node_loss(const SoftMatching& soft, const UniverseMatching& gt, double label_smoothing);

// LAP discretization of a soft matching (auction solver).
UniverseMatching discretize(const SoftMatching& soft);

enum class CentroidMode { kPaper, kOccurrence };

// Closed-form universe representations from encoded features and ground-truth
// matchings: mean over graphs (paper mode) or over actual occurrences.
Tensor centroid_universe(const std::vector<Tensor>& encoded,
                         const std::vector<UniverseMatching>& gt, int universe_size,
                         CentroidMode mode);

struct MatchResult {
    std::vector<SoftMatching> soft;
    std::vector<UniverseMatching> hard;
    std::vector<std::vector<double>> lifted_z;
    int universe_size = 0;

    PartialPermutation pairwise(int i, int j) const;
    MatchingCollection collection() const;
};

// Encodes and discretizes every graph independently; the derived pairwise
// matchings are cycle-consistent by construction.
MatchResult match_collection(const ParamStore& store, const EncoderConfig& config,
                             const std::vector<Graph>& graphs);

// Fresh parameter tensors for the configuration, deterministically seeded.
ParamStore init_params(const EncoderConfig& config, std::uint64_t seed);

// Reconstructs the architecture from checkpoint tensor names and shapes.
// Regularization fields keep their defaults; they do not affect inference.
EncoderConfig config_from_params(const ParamStore& store);

}  // namespace url
