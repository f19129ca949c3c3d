#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "url/geometry.hpp"
#include "url/matching.hpp"

namespace url {

struct SynthConfig {
    int n_univ = 25;           // universe size
    double p_vis = 0.8;        // per-point visibility rate
    double sigma_feat = 1.5;   // feature noise std
    double sigma_coo = 10.0;   // coordinate noise std
    int feat_dim = 1024;
    double canvas = 256.0;
    int n_train = 200;
    int n_test = 100;
    // Affine perturbation ranges (rotation about the canvas center).
    double rot_max_deg = 30.0;
    double scale_min = 0.8;
    double scale_max = 1.2;
    double trans_max = 20.0;
    std::uint64_t seed = 123;

    void validate() const;
};

// The anchor ground-truth graph: one feature vector and coordinate per
// universe point.
struct Anchor {
    Tensor features;             // n_univ x feat_dim, U(-1, 1)
    std::vector<Point2> coords;  // U(0, canvas)^2
};

Anchor generate_anchor(const SynthConfig& config, std::uint64_t seed);

// One perturbed sample: Bernoulli(p_vis) visibility per universe point
// (resampled until at least 3 survive), Gaussian feature noise, random affine
// plus Gaussian coordinate noise, Delaunay edges, surviving universe indices
// as labels. `stream` separates graphs so they can be generated in any order.
Graph sample_graph(const Anchor& anchor, const SynthConfig& config, std::uint64_t seed,
                   std::uint64_t stream);

struct F1Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Micro-aggregated over all unordered pairs i < j of the two collections.
F1Score f1_score(const std::vector<PartialPermutation>& predicted,
                 const std::vector<PartialPermutation>& ground_truth);

// Per-pair F1 averaged over pairs (reported for transparency alongside micro).
double macro_f1_score(const std::vector<PartialPermutation>& predicted,
                      const std::vector<PartialPermutation>& ground_truth);

// Both graphs restricted to universe labels present in each; node order
// preserved, edges recomputed by Delaunay. Empty when the label sets are
// disjoint (such pairs are skipped in evaluation).
std::optional<std::pair<Graph, Graph>> intersection_filter(const Graph& gi, const Graph& gj);

// Fraction of correctly assigned rows over full (bijective) matchings,
// micro-aggregated.
double accuracy(const std::vector<PartialPermutation>& predicted,
                const std::vector<PartialPermutation>& ground_truth);

// Fraction of sampled index triples violating Identity, Symmetry or Partial
// Transitivity. For k >= 3 the triples are distinct {i < j < l}, exhaustive
// when k^3 <= n_triples; for k < 3 the degenerate triples are checked.
double violation_rate(const MatchingCollection& collection, int n_triples,
                      std::uint64_t seed = 123);

// Cycle-inconsistent comparator: LAP over the feature similarity of the
// smaller side, then matches below the similarity threshold are dropped.
PartialPermutation pairwise_baseline_match(const Tensor& features_i, const Tensor& features_j,
                                           double threshold);

}  // namespace url
