#include "url/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "url/errors.hpp"

namespace url {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: '" + key + "' expects a number, got '" + value + "'");
    }
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ValidationError("config: '" + key + "' expects an integer, got '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: '" + key + "' expects an unsigned integer, got '" + value +
                              "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ValidationError("config: '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ValidationError("config: train.lr must be positive");
    if (weight_decay < 0.0) throw ValidationError("config: train.weight_decay must be >= 0");
    if (epochs < 0) throw ValidationError("config: train.epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("config: train.batch_size must be >= 1");
    if (max_steps < 0) throw ValidationError("config: train.max_steps must be >= 0");
    if (early_stop_patience < 1)
        throw ValidationError("config: train.early_stop_patience must be >= 1");
}

void EvalConfig::validate() const {
    if (n_triples < 1) throw ValidationError("config: eval.n_triples must be >= 1");
    if (tau_percentile < 0.0 || tau_percentile > 100.0)
        throw ValidationError("config: eval.tau_percentile must be in [0,100]");
}

std::vector<double> SweepConfig::effective_values() const {
    if (!values.empty()) return values;
    if (axis == SweepAxis::kVisibility) return {0.2, 0.4, 0.6, 0.8, 1.0};
    return {25, 50, 100, 200, 500, 1000};
}

void SweepConfig::validate() const {
    if (max_steps < 0) throw ValidationError("config: sweep.max_steps must be >= 0");
    for (double v : effective_values()) {
        if (axis == SweepAxis::kVisibility) {
            if (v <= 0.0 || v > 1.0)
                throw ValidationError("config: visibility sweep values must be in (0,1]");
        } else {
            if (v < 3.0 || v != static_cast<double>(static_cast<int>(v)))
                throw ValidationError("config: size sweep values must be integers >= 3");
        }
    }
}

void ExperimentConfig::validate() const {
    synth.validate();
    // The dataset supplies input_dim and universe_size; validate the rest.
    bound_model(synth).validate();
    train.validate();
    eval.validate();
    sweep.validate();
}

EncoderConfig ExperimentConfig::bound_model(const SynthConfig& data) const {
    EncoderConfig m = model;
    m.input_dim = data.feat_dim;
    m.universe_size = data.n_univ;
    return m;
}

CentroidMode parse_centroid_mode(const std::string& text) {
    if (text == "paper") return CentroidMode::kPaper;
    if (text == "occurrence") return CentroidMode::kOccurrence;
    throw ValidationError("config: centroid mode must be 'paper' or 'occurrence', got '" + text +
                          "'");
}

EvalMode parse_eval_mode(const std::string& text) {
    if (text == "union") return EvalMode::kUnion;
    if (text == "intersection") return EvalMode::kIntersection;
    throw ValidationError("config: eval mode must be 'union' or 'intersection', got '" + text +
                          "'");
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "visibility") return SweepAxis::kVisibility;
    if (text == "size") return SweepAxis::kSize;
    throw ValidationError("config: sweep axis must be 'visibility' or 'size', got '" + text + "'");
}

std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ValidationError("config: empty entry in value list");
        values.push_back(to_double("values", item));
    }
    if (values.empty()) throw ValidationError("config: empty value list");
    return values;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " is not of the form key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " has an empty key or value");

        if (key == "synth.n_univ") cfg.synth.n_univ = to_int(key, value);
        else if (key == "synth.p_vis") cfg.synth.p_vis = to_double(key, value);
        else if (key == "synth.sigma_feat") cfg.synth.sigma_feat = to_double(key, value);
        else if (key == "synth.sigma_coo") cfg.synth.sigma_coo = to_double(key, value);
        else if (key == "synth.feat_dim") cfg.synth.feat_dim = to_int(key, value);
        else if (key == "synth.canvas") cfg.synth.canvas = to_double(key, value);
        else if (key == "synth.n_train") cfg.synth.n_train = to_int(key, value);
        else if (key == "synth.n_test") cfg.synth.n_test = to_int(key, value);
        else if (key == "synth.rot_max_deg") cfg.synth.rot_max_deg = to_double(key, value);
        else if (key == "synth.scale_min") cfg.synth.scale_min = to_double(key, value);
        else if (key == "synth.scale_max") cfg.synth.scale_max = to_double(key, value);
        else if (key == "synth.trans_max") cfg.synth.trans_max = to_double(key, value);
        else if (key == "synth.seed") cfg.synth.seed = to_u64(key, value);
        else if (key == "model.hidden_dim") cfg.model.hidden_dim = to_int(key, value);
        else if (key == "model.spline_layers_2d") cfg.model.spline_layers_2d = to_int(key, value);
        else if (key == "model.spline_layers_3d") cfg.model.spline_layers_3d = to_int(key, value);
        else if (key == "model.kernel_knots") cfg.model.kernel_knots = to_int(key, value);
        else if (key == "model.mlp_z_hidden") cfg.model.mlp_z_hidden = to_int(key, value);
        else if (key == "model.dropout") cfg.model.dropout_rate = to_double(key, value);
        else if (key == "model.label_smoothing") cfg.model.label_smoothing = to_double(key, value);
        else if (key == "train.lr") cfg.train.lr = to_double(key, value);
        else if (key == "train.weight_decay") cfg.train.weight_decay = to_double(key, value);
        else if (key == "train.beta1") cfg.train.beta1 = to_double(key, value);
        else if (key == "train.beta2") cfg.train.beta2 = to_double(key, value);
        else if (key == "train.adam_eps") cfg.train.adam_eps = to_double(key, value);
        else if (key == "train.epochs") cfg.train.epochs = to_int(key, value);
        else if (key == "train.batch_size") cfg.train.batch_size = to_int(key, value);
        else if (key == "train.seed") cfg.train.seed = to_u64(key, value);
        else if (key == "train.max_steps") cfg.train.max_steps = to_int(key, value);
        else if (key == "train.early_stop_f1") cfg.train.early_stop_f1 = to_double(key, value);
        else if (key == "train.early_stop_patience")
            cfg.train.early_stop_patience = to_int(key, value);
        else if (key == "train.centroid_mode")
            cfg.train.centroid_mode = parse_centroid_mode(value);
        else if (key == "eval.mode") cfg.eval.mode = parse_eval_mode(value);
        else if (key == "eval.n_triples") cfg.eval.n_triples = to_int(key, value);
        else if (key == "eval.baseline") cfg.eval.baseline = to_bool(key, value);
        else if (key == "eval.tau_percentile") cfg.eval.tau_percentile = to_double(key, value);
        else if (key == "eval.seed") cfg.eval.seed = to_u64(key, value);
        else if (key == "sweep.axis") cfg.sweep.axis = parse_sweep_axis(value);
        else if (key == "sweep.values") cfg.sweep.values = parse_value_list(value);
        else if (key == "sweep.max_steps") cfg.sweep.max_steps = to_int(key, value);
        else
            throw ValidationError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::optional<std::string>& path) {
    if (!path) {
        ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    std::ifstream in(*path);
    if (!in) throw IoError("config: cannot open '" + *path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace url
