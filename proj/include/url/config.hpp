#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "url/model.hpp"
#include "url/synth.hpp"

namespace url {

struct TrainConfig {
    double lr = 7e-4;
    double weight_decay = 3e-7;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 300;
    int batch_size = 16;
    std::uint64_t seed = 123;
    int max_steps = 0;  // 0 = uncapped
    // Stop once train F1 reaches this level for `early_stop_patience`
    // consecutive epochs; values > 1 disable the rule.
    double early_stop_f1 = 1.0;
    int early_stop_patience = 5;
    CentroidMode centroid_mode = CentroidMode::kPaper;

    void validate() const;
};

enum class EvalMode { kUnion, kIntersection };

struct EvalConfig {
    EvalMode mode = EvalMode::kUnion;
    int n_triples = 500;
    bool baseline = false;
    double tau_percentile = 75.0;  // baseline threshold percentile
    std::uint64_t seed = 123;     // triple sampling

    void validate() const;
};

enum class SweepAxis { kVisibility, kSize };

struct SweepConfig {
    SweepAxis axis = SweepAxis::kVisibility;
    std::vector<double> values;  // empty = axis default grid
    int max_steps = 800;         // per-point gradient step cap; 0 = uncapped

    std::vector<double> effective_values() const;
    void validate() const;
};

struct ExperimentConfig {
    SynthConfig synth;
    EncoderConfig model;  // input_dim / universe_size are overridden by the dataset
    TrainConfig train;
    EvalConfig eval;
    SweepConfig sweep;

    void validate() const;
    // The encoder configuration bound to a dataset's dimensions.
    EncoderConfig bound_model(const SynthConfig& data) const;
};

// Line-oriented `key = value` text with dotted section prefixes
// (synth.*, model.*, train.*, eval.*, sweep.*). '#' starts a comment.
// Unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::optional<std::string>& path);

CentroidMode parse_centroid_mode(const std::string& text);
EvalMode parse_eval_mode(const std::string& text);
SweepAxis parse_sweep_axis(const std::string& text);
std::vector<double> parse_value_list(const std::string& text);

}  // namespace url
