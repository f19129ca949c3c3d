// Command-line runner for the partial multi-graph matching experiments:
// dataset generation, training, evaluation, and the robustness sweeps.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "url/checkpoint.hpp"
#include "url/config.hpp"
#include "url/dataset_io.hpp"
#include "url/errors.hpp"
#include "url/trainer.hpp"

namespace {

using namespace url;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

struct CommonArgs {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;
};

ExperimentConfig load_with_overrides(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (args.seed) {
        cfg.synth.seed = *args.seed;
        cfg.train.seed = *args.seed;
        cfg.eval.seed = *args.seed;
    }
    cfg.validate();
    return cfg;
}

int cmd_gen(const CommonArgs& args) {
    if (!args.out_path) throw ValidationError("gen: --out is required");
    const ExperimentConfig cfg = load_with_overrides(args);
    const Dataset dataset = generate_dataset(cfg.synth);
    write_dataset(*args.out_path, dataset);
    std::cout << "wrote " << dataset.train.size() << " train + " << dataset.test.size()
              << " test graphs to " << *args.out_path << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, const CommonArgs& args,
              const std::string& centroid_mode) {
    if (!args.out_path) throw ValidationError("train: --out is required");
    ExperimentConfig cfg = load_with_overrides(args);
    if (!centroid_mode.empty()) cfg.train.centroid_mode = parse_centroid_mode(centroid_mode);
    const Dataset dataset = read_dataset(dataset_path);
    const EncoderConfig enc = cfg.bound_model(dataset.config);

    std::ostringstream log;
    const TrainOutput trained = train_model(dataset, cfg, &log);
    std::cout << log.str();

    const std::string prefix = *args.out_path;
    write_text(prefix + ".log", log.str());
    save_checkpoint(prefix + ".best.ckpt", trained.best_params);
    save_checkpoint(prefix + ".final.ckpt", trained.final_params);
    save_checkpoint(prefix + ".centroid.ckpt",
                    centroid_refit(trained.final_params, enc, dataset.train,
                                   cfg.train.centroid_mode));
    std::cout << "best_epoch=" << trained.best_epoch << " best_loss=" << fmt(trained.best_loss)
              << " steps=" << trained.steps << (trained.stopped_early ? " (early stop)" : "")
              << "\n";
    return 0;
}

int cmd_eval(const std::string& dataset_path, const std::string& checkpoint_path,
             const CommonArgs& args, const std::string& mode, bool baseline) {
    ExperimentConfig cfg = load_with_overrides(args);
    if (!mode.empty()) cfg.eval.mode = parse_eval_mode(mode);
    if (baseline) cfg.eval.baseline = true;

    const Dataset dataset = read_dataset(dataset_path);
    const ParamStore params = load_checkpoint(checkpoint_path);
    const EncoderConfig enc = config_from_params(params);
    if (enc.universe_size != dataset.config.n_univ)
        throw ValidationError("eval: checkpoint universe size does not match the dataset");
    if (enc.input_dim != dataset.config.feat_dim)
        throw ValidationError("eval: checkpoint feature dimension does not match the dataset");

    std::ostringstream csv;
    csv << "mode,f1,precision,recall,macro_f1,accuracy,violation_rate,wall_time_ms\n";
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&start]() {
        return std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(
                   std::chrono::steady_clock::now() - start)
            .count();
    };
    if (cfg.eval.mode == EvalMode::kUnion) {
        if (cfg.eval.baseline) {
            const BaselineEvalResult r =
                evaluate_baseline(params, enc, dataset.train, dataset.test, cfg.eval);
            csv << "baseline," << fmt(r.metrics.f1) << ',' << fmt(r.metrics.precision) << ','
                << fmt(r.metrics.recall) << ',' << fmt(r.metrics.macro_f1) << ",,"
                << fmt(r.metrics.violation_rate) << ',' << fmt(elapsed_ms()) << "\n";
            std::cout << "baseline tau=" << fmt(r.tau) << "\n";
        } else {
            const UnionEvalResult r = evaluate_union(params, enc, dataset.test, cfg.eval);
            csv << "union," << fmt(r.f1) << ',' << fmt(r.precision) << ',' << fmt(r.recall) << ','
                << fmt(r.macro_f1) << ",," << fmt(r.violation_rate) << ',' << fmt(elapsed_ms())
                << "\n";
        }
    } else {
        const double acc = evaluate_intersection(params, enc, dataset.test);
        csv << "intersection,,,,," << fmt(acc) << ",," << fmt(elapsed_ms()) << "\n";
    }
    std::cout << csv.str();
    if (args.out_path) write_text(*args.out_path, csv.str());
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis, const std::string& values) {
    ExperimentConfig cfg = load_with_overrides(args);
    if (!axis.empty()) cfg.sweep.axis = parse_sweep_axis(axis);
    if (!values.empty()) cfg.sweep.values = parse_value_list(values);
    cfg.validate();

    const std::vector<SweepRow> rows = run_sweep(cfg, &std::cerr);
    std::ostringstream csv;
    csv << "axis,value,f1,precision,recall,violation_rate,wall_time_ms\n";
    for (const SweepRow& r : rows)
        csv << r.axis << ',' << fmt(r.value) << ',' << fmt(r.f1) << ',' << fmt(r.precision) << ','
            << fmt(r.recall) << ',' << fmt(r.violation_rate) << ',' << fmt(r.wall_time_ms) << "\n";
    std::cout << csv.str();
    if (args.out_path) write_text(*args.out_path, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"universe-point representation learning for partial multi-graph matching"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, sweep_args;
    std::string train_dataset, eval_dataset, eval_checkpoint;
    std::string train_centroid_mode, eval_mode, sweep_axis, sweep_values;
    bool eval_baseline = false;

    auto add_common = [](CLI::App* cmd, CommonArgs& args) {
        cmd->add_option("--config", args.config_path, "experiment config file (key = value)");
        cmd->add_option("--seed", args.seed, "override synth/train/eval seeds");
        cmd->add_option("--out", args.out_path, "output path");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset file");
    add_common(gen, gen_args);

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    train->add_option("dataset", train_dataset, "dataset file")->required();
    train->add_option("--centroid-mode", train_centroid_mode,
                      "universe refit mode for the centroid checkpoint (paper|occurrence)");
    add_common(train, train_args);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("dataset", eval_dataset, "dataset file")->required();
    eval->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--mode", eval_mode, "union|intersection");
    eval->add_flag("--baseline", eval_baseline, "evaluate the pairwise baseline instead of URL");
    add_common(eval, eval_args);

    CLI::App* sweep = app.add_subcommand("sweep", "regenerate/train/evaluate along an axis");
    sweep->add_option("--axis", sweep_axis, "visibility|size");
    sweep->add_option("--values", sweep_values, "comma-separated sweep values");
    add_common(sweep, sweep_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (train->parsed()) return cmd_train(train_dataset, train_args, train_centroid_mode);
        if (eval->parsed())
            return cmd_eval(eval_dataset, eval_checkpoint, eval_args, eval_mode, eval_baseline);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_axis, sweep_values);
    } catch (const url::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const url::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const url::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
