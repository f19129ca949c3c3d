#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "url/config.hpp"
#include "url/dataset_io.hpp"
#include "url/model.hpp"

namespace url {

// Micro F1 over all unordered pairs of universe matchings, without
// materializing the pairwise matrices.
F1Score multi_f1_from_universe(const std::vector<UniverseMatching>& predicted,
                               const std::vector<UniverseMatching>& ground_truth);
double multi_macro_f1_from_universe(const std::vector<UniverseMatching>& predicted,
                                    const std::vector<UniverseMatching>& ground_truth);

// Ground-truth universe matchings read off the graph labels.
std::vector<UniverseMatching> ground_truth_matchings(const std::vector<Graph>& graphs,
                                                     int universe_size);

struct TrainLogEntry {
    int epoch = 0;
    double loss = 0.0;      // mean per-graph loss
    double train_f1 = 0.0;  // micro F1 of the discretized training forward passes
};

struct TrainOutput {
    ParamStore final_params;
    ParamStore best_params;  // lowest epoch loss
    int best_epoch = -1;
    double best_loss = 0.0;
    std::vector<TrainLogEntry> log;
    std::int64_t steps = 0;
    bool stopped_early = false;
};

// Minimizes the summed per-graph cross entropy with Adam. Deterministic for a
// fixed (config, dataset): shuffling and dropout draw from seeded streams.
// When `log_stream` is given, one `epoch= loss= train_f1=` line per epoch is
// written.
TrainOutput train_model(const Dataset& dataset, const ExperimentConfig& config,
                        std::ostream* log_stream = nullptr);

// Universe embeddings refit as ground-truth centroids of the encoded training
// features; returns a copy of `params` with the embedding tensor replaced.
ParamStore centroid_refit(const ParamStore& params, const EncoderConfig& config,
                          const std::vector<Graph>& train, CentroidMode mode);

struct UnionEvalResult {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double macro_f1 = 0.0;
    double violation_rate = 0.0;
};

// Partial multi-matching metrics of the URL predictions over a test
// collection.
UnionEvalResult evaluate_union(const ParamStore& params, const EncoderConfig& config,
                               const std::vector<Graph>& test, const EvalConfig& eval);

struct BaselineEvalResult {
    UnionEvalResult metrics;
    double tau = 0.0;  // similarity threshold derived from the training split
};

// Cycle-inconsistent pairwise comparator on the same encoder features. The
// threshold is the `tau_percentile` of ground-truth-matched feature
// similarities on the training split.
BaselineEvalResult evaluate_baseline(const ParamStore& params, const EncoderConfig& config,
                                     const std::vector<Graph>& train,
                                     const std::vector<Graph>& test, const EvalConfig& eval);

// Full two-graph matching accuracy over intersection-filtered test pairs;
// pairs with no shared labels are skipped. The pairwise prediction solves a
// square LAP over the product of the two soft matchings.
double evaluate_intersection(const ParamStore& params, const EncoderConfig& config,
                             const std::vector<Graph>& test);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double violation_rate = 0.0;
    double wall_time_ms = 0.0;
    int epoch_of_best = -1;
};

// One regenerate -> train -> evaluate cycle per sweep value. The sweep step
// cap replaces train.max_steps for every point.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, std::ostream* progress = nullptr);

}  // namespace url
