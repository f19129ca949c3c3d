// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line so the whole gate is readable from the ctest log.
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "url/assignment.hpp"
#include "url/checkpoint.hpp"
#include "url/config.hpp"
#include "url/dataset_io.hpp"
#include "url/matching.hpp"
#include "url/model.hpp"
#include "url/rng.hpp"
#include "url/trainer.hpp"

using namespace url;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration_cast<std::chrono::duration<double>>(
                   std::chrono::steady_clock::now() - start)
            .count();
    }
};

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("ACCEPTANCE %02d %s %s\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", criterion, ": ", detail);
}

UniverseMatching random_universe_matching(int m, int d, Rng& rng) {
    std::vector<int> cols(static_cast<std::size_t>(d));
    std::iota(cols.begin(), cols.end(), 0);
    for (int i = d - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
        std::swap(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
    cols.resize(static_cast<std::size_t>(m));
    return UniverseMatching(d, std::move(cols));
}

Graph random_labeled_graph(int m, int f, int d, Rng& rng) {
    std::vector<Point2> coords;
    Tensor features({m, f});
    for (int v = 0; v < m; ++v) {
        coords.push_back({rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0)});
        for (int j = 0; j < f; ++j) features.at(v, j) = rng.uniform(-1.0, 1.0);
    }
    const UniverseMatching labels = random_universe_matching(m, d, rng);
    return make_graph(std::move(coords), std::move(features), labels.assignment());
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

SynthConfig default_synth() { return SynthConfig{}; }

}  // namespace

TEST_CASE("acceptance 01 lemma-1 construction") {
    Stopwatch watch;
    Rng rng(1001);
    bool all_consistent = true;
    for (int trial = 0; trial < 1000 && all_consistent; ++trial) {
        const int k = 1 + static_cast<int>(rng.next_below(6));
        const int d = 1 + static_cast<int>(rng.next_below(12));
        std::vector<UniverseMatching> xs;
        for (int i = 0; i < k; ++i) {
            const int m = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(d + 1)));
            xs.push_back(random_universe_matching(m, d, rng));
        }
        const auto report_c = check_cycle_consistency(MatchingCollection::from_universe(xs));
        all_consistent = report_c.is_consistent();
    }
    const double elapsed = watch.seconds();
    report(1, all_consistent && elapsed < 5.0,
           fmt("1000 random collections consistent=%g elapsed=%.2fs (budget 5s)",
               all_consistent ? 1.0 : 0.0, elapsed));
}

TEST_CASE("acceptance 02 lap auction vs exhaustive oracle") {
    Stopwatch watch;
    Rng rng(1002);
    double worst_gap = 0.0;
    int assignment_mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 1 + static_cast<int>(rng.next_below(5));
        const int d = m + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(8 - m)));
        std::vector<double> values(static_cast<std::size_t>(m) * static_cast<std::size_t>(d));
        for (double& v : values) v = rng.uniform(-1.0, 1.0);
        const ScoreMatrix scores(m, d, std::move(values));
        const LapResult auction = solve_lap_auction(scores);
        const ExactLapResult exact = solve_lap_exact(scores);
        worst_gap = std::max(worst_gap, std::abs(auction.objective - exact.objective));
        if (exact.objective - exact.runner_up > 1e-6 &&
            auction.matching.assignment() != exact.matching.assignment())
            ++assignment_mismatches;
    }
    const double elapsed = watch.seconds();
    report(2, worst_gap <= 1e-12 && assignment_mismatches == 0 && elapsed < 10.0,
           fmt("500 instances, max |objective gap|=%.3g, assignment mismatches=%g, elapsed=%.2fs",
               worst_gap, static_cast<double>(assignment_mismatches), elapsed));
}

TEST_CASE("acceptance 03 gradient fidelity") {
    Stopwatch watch;
    EncoderConfig cfg;
    cfg.input_dim = 8;
    cfg.hidden_dim = 8;
    cfg.spline_layers_2d = 2;
    cfg.spline_layers_3d = 1;
    cfg.kernel_knots = 3;
    cfg.mlp_z_hidden = 4;
    cfg.dropout_rate = 0.0;  // dropout disabled for determinism
    cfg.label_smoothing = 0.4;
    cfg.universe_size = 10;

    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(2000 + static_cast<std::uint64_t>(trial));
        const int m = 4 + static_cast<int>(rng.next_below(5));
        const Graph graph = random_labeled_graph(m, cfg.input_dim, cfg.universe_size, rng);
        const ParamStore params = init_params(cfg, 3000 + static_cast<std::uint64_t>(trial));
        const double err = grad_check(
            [&](Tape& t, const ParamStore& s) {
                ParamVars vars = ParamVars::bind(t, s, cfg, true);
                return total_loss_on_tape(t, vars, cfg, {&graph}, nullptr);
            },
            params, 1e-5);
        worst = std::max(worst, err);
    }
    const double elapsed = watch.seconds();
    report(3, worst < 1e-4 && elapsed < 120.0,
           fmt("10 graphs, max relative gradient error=%.3g (tolerance 1e-4), elapsed=%.1fs",
               worst, elapsed));
}

TEST_CASE("acceptance 04 centroid universe oracle") {
    Stopwatch watch;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(4000 + static_cast<std::uint64_t>(trial));
        const int k = 1 + static_cast<int>(rng.next_below(5));
        const int d = 2 + static_cast<int>(rng.next_below(5));
        const int h = 1 + static_cast<int>(rng.next_below(4));
        std::vector<Tensor> feats;
        std::vector<UniverseMatching> gt;
        for (int i = 0; i < k; ++i) {
            const int m = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(d)));
            Tensor f({m, h});
            for (std::int64_t x = 0; x < f.size(); ++x) f[x] = rng.uniform(-2.0, 2.0);
            feats.push_back(std::move(f));
            gt.push_back(random_universe_matching(m, d, rng));
        }
        const Tensor closed_form = centroid_universe(feats, gt, d, CentroidMode::kPaper);

        // Independent oracle: gradient descent on sum_i ||X_i^T F_i - U||^2.
        Tensor target({d, h});
        for (int i = 0; i < k; ++i)
            for (int v = 0; v < gt[static_cast<std::size_t>(i)].rows(); ++v)
                for (int j = 0; j < h; ++j)
                    target.at(gt[static_cast<std::size_t>(i)].column_of(v), j) +=
                        feats[static_cast<std::size_t>(i)].at(v, j);
        Tensor u({d, h});
        const double lr = 0.4 / static_cast<double>(k);
        for (int it = 0; it < 20000; ++it) {
            double max_grad = 0.0;
            for (std::int64_t x = 0; x < u.size(); ++x) {
                const double grad = 2.0 * (static_cast<double>(k) * u[x] - target[x]);
                u[x] -= lr * grad;
                max_grad = std::max(max_grad, std::abs(grad));
            }
            if (max_grad < 1e-12) break;
        }
        for (std::int64_t x = 0; x < u.size(); ++x)
            worst = std::max(worst, std::abs(u[x] - closed_form[x]));
    }
    const double elapsed = watch.seconds();
    report(4, worst <= 1e-6 && elapsed < 30.0,
           fmt("20 instances, max |U_gd - U*| = %.3g (tolerance 1e-6), elapsed=%.1fs", worst,
               elapsed));
}

TEST_CASE("acceptance 05 separable-instance convergence") {
    Stopwatch watch;
    ExperimentConfig cfg;
    cfg.synth = default_synth();
    cfg.synth.sigma_feat = 0.0;
    cfg.synth.sigma_coo = 0.0;
    cfg.synth.rot_max_deg = 0.0;
    cfg.synth.scale_min = cfg.synth.scale_max = 1.0;
    cfg.synth.trans_max = 0.0;
    cfg.train.epochs = 200;
    cfg.validate();

    const Dataset dataset = generate_dataset(cfg.synth);
    const TrainOutput trained = train_model(dataset, cfg, nullptr);
    const EncoderConfig enc = cfg.bound_model(dataset.config);
    const UnionEvalResult result = evaluate_union(trained.final_params, enc, dataset.test, cfg.eval);
    const double elapsed = watch.seconds();
    report(5, result.f1 == 1.0 && elapsed < 300.0,
           fmt("noise-free test F1=%.6f (required 1.0), epochs used<=200, elapsed=%.1fs",
               result.f1, elapsed));
}

TEST_CASE("acceptance 06 default-noise benchmark vs baseline") {
    Stopwatch watch;
    ExperimentConfig cfg;  // paper-protocol data parameters are the defaults
    cfg.train.epochs = 120;
    cfg.validate();

    const Dataset dataset = generate_dataset(cfg.synth);
    const TrainOutput trained = train_model(dataset, cfg, nullptr);
    const EncoderConfig enc = cfg.bound_model(dataset.config);

    const UnionEvalResult url_result =
        evaluate_union(trained.best_params, enc, dataset.test, cfg.eval);
    const BaselineEvalResult baseline =
        evaluate_baseline(trained.best_params, enc, dataset.train, dataset.test, cfg.eval);

    const bool f1_margin = url_result.f1 >= baseline.metrics.f1 + 0.05;
    const bool url_clean = url_result.violation_rate == 0.0;
    const bool baseline_dirty = baseline.metrics.violation_rate > 0.0;
    const double elapsed = watch.seconds();
    report(6, f1_margin && url_clean && baseline_dirty && elapsed < 900.0,
           fmt("URL F1=%.4f vs baseline F1=%.4f (margin >= 0.05); violation rates %.4f",
               url_result.f1, baseline.metrics.f1, baseline.metrics.violation_rate) +
               fmt(" (URL %.4f), elapsed=%.0fs", url_result.violation_rate, elapsed));
}

TEST_CASE("acceptance 07 partiality robustness") {
    Stopwatch watch;
    ExperimentConfig cfg;
    cfg.sweep.axis = SweepAxis::kVisibility;
    cfg.sweep.values = {0.2, 0.4, 0.6, 0.8, 1.0};
    cfg.sweep.max_steps = 800;
    cfg.validate();

    const std::vector<SweepRow> rows = run_sweep(cfg, nullptr);
    double f1_at_04 = 0.0, f1_at_10 = 0.0;
    std::string curve = "F1 curve:";
    for (const SweepRow& r : rows) {
        curve += fmt(" %.1f->%.4f", r.value, r.f1);
        if (r.value == 0.4) f1_at_04 = r.f1;
        if (r.value == 1.0) f1_at_10 = r.f1;
    }
    const double elapsed = watch.seconds();
    const bool ok = f1_at_04 >= 0.75 * f1_at_10;
    report(7, ok && elapsed < 2700.0,
           curve + fmt("; F1@0.4=%.4f >= 0.75*F1@1.0=%.4f, elapsed=%.0fs", f1_at_04,
                       0.75 * f1_at_10, elapsed));
}

TEST_CASE("acceptance 08 size robustness and scalability") {
    Stopwatch watch;
    ExperimentConfig cfg;
    cfg.sweep.axis = SweepAxis::kSize;
    cfg.sweep.values = {25, 200};
    cfg.sweep.max_steps = 800;
    cfg.validate();

    const std::vector<SweepRow> rows = run_sweep(cfg, nullptr);
    double f1_small = 0.0, f1_large = 0.0;
    for (const SweepRow& r : rows) {
        if (r.value == 25) f1_small = r.f1;
        if (r.value == 200) f1_large = r.f1;
    }
    const bool f1_ok = f1_large >= f1_small - 0.10;

    // Single-graph inference at 1000 universe points, single-threaded.
    SynthConfig big = default_synth();
    big.n_univ = 1000;
    const Anchor anchor = generate_anchor(big, big.seed);
    const Graph graph = sample_graph(anchor, big, big.seed, 0);
    EncoderConfig enc;
    enc.universe_size = big.n_univ;
    enc.input_dim = big.feat_dim;
    const ParamStore params = init_params(enc, 8);
    Stopwatch inference;
    const EncodeResult encoded = encode(params, enc, graph);
    const SoftMatching soft = soft_matching(encoded.features, params.at("universe.embedding"));
    const UniverseMatching hard = discretize(soft);
    const double infer_seconds = inference.seconds();
    const bool infer_ok = infer_seconds < 10.0 && hard.rows() == graph.node_count;

    const double elapsed = watch.seconds();
    report(8, f1_ok && infer_ok && elapsed < 7200.0,
           fmt("F1@25=%.4f F1@200=%.4f (drop <= 0.10); ", f1_small, f1_large) +
               fmt("inference at N=1000 (m=%g): %.2fs (budget 10s), elapsed=%.0fs",
                   static_cast<double>(graph.node_count), infer_seconds, elapsed));
}

TEST_CASE("acceptance 09 permutation equivariance") {
    Stopwatch watch;
    EncoderConfig cfg;
    cfg.input_dim = 12;
    cfg.hidden_dim = 16;
    cfg.kernel_knots = 4;
    cfg.mlp_z_hidden = 8;
    cfg.dropout_rate = 0.0;
    cfg.universe_size = 14;

    double worst = 0.0;
    bool matchings_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(9000 + static_cast<std::uint64_t>(trial));
        const ParamStore params = init_params(cfg, 500 + static_cast<std::uint64_t>(trial));
        const int m = 4 + static_cast<int>(rng.next_below(8));
        const Graph g = random_labeled_graph(m, cfg.input_dim, cfg.universe_size, rng);

        std::vector<int> perm(static_cast<std::size_t>(m));
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = m - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        std::vector<Point2> coords(static_cast<std::size_t>(m));
        Tensor features({m, cfg.input_dim});
        for (int v = 0; v < m; ++v) {
            const int src = perm[static_cast<std::size_t>(v)];
            coords[static_cast<std::size_t>(v)] = g.coords[static_cast<std::size_t>(src)];
            for (int j = 0; j < cfg.input_dim; ++j) features.at(v, j) = g.features.at(src, j);
        }
        const Graph pg = make_graph(std::move(coords), std::move(features));

        const EncodeResult a = encode(params, cfg, g);
        const EncodeResult b = encode(params, cfg, pg);
        for (int v = 0; v < m; ++v)
            for (int j = 0; j < cfg.hidden_dim; ++j)
                worst = std::max(worst,
                                 std::abs(b.features.at(v, j) -
                                          a.features.at(perm[static_cast<std::size_t>(v)], j)));

        const Tensor& universe = params.at("universe.embedding");
        const UniverseMatching ha = discretize(soft_matching(a.features, universe));
        const UniverseMatching hb = discretize(soft_matching(b.features, universe));
        for (int v = 0; v < m && matchings_ok; ++v)
            matchings_ok =
                hb.column_of(v) == ha.column_of(perm[static_cast<std::size_t>(v)]);
    }
    const double elapsed = watch.seconds();
    report(9, worst <= 1e-9 && matchings_ok && elapsed < 120.0,
           fmt("100 trials, max |encode(pi g) - pi encode(g)| = %.3g (tolerance 1e-9), "
               "hard matchings permuted=%g, elapsed=%.1fs",
               worst, matchings_ok ? 1.0 : 0.0, elapsed));
}

TEST_CASE("acceptance 10 determinism and persistence") {
    Stopwatch watch;
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "url_acceptance_10";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ExperimentConfig cfg;
    cfg.synth.n_univ = 8;
    cfg.synth.feat_dim = 16;
    cfg.synth.n_train = 12;
    cfg.synth.n_test = 6;
    cfg.model.hidden_dim = 8;
    cfg.model.kernel_knots = 3;
    cfg.model.mlp_z_hidden = 4;
    cfg.train.epochs = 4;
    cfg.train.batch_size = 4;
    cfg.eval.n_triples = 100;
    cfg.validate();

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };

    // Datasets regenerate bit-identically.
    const Dataset d1 = generate_dataset(cfg.synth);
    const Dataset d2 = generate_dataset(cfg.synth);
    write_dataset((dir / "a.jsonl").string(), d1);
    write_dataset((dir / "b.jsonl").string(), d2);
    const bool dataset_ok = slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl");

    // Training logs and checkpoints reproduce bit-identically.
    std::ostringstream log1, log2;
    const TrainOutput t1 = train_model(d1, cfg, &log1);
    const TrainOutput t2 = train_model(d2, cfg, &log2);
    save_checkpoint((dir / "a.ckpt").string(), t1.final_params);
    save_checkpoint((dir / "b.ckpt").string(), t2.final_params);
    const bool log_ok = log1.str() == log2.str() && !log1.str().empty();
    const bool ckpt_ok = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt");

    // Save -> load -> eval equals in-memory eval exactly.
    const EncoderConfig enc = cfg.bound_model(d1.config);
    const ParamStore loaded = load_checkpoint((dir / "a.ckpt").string());
    const bool loaded_equal = loaded == t1.final_params;
    const UnionEvalResult in_memory = evaluate_union(t1.final_params, enc, d1.test, cfg.eval);
    const UnionEvalResult from_disk =
        evaluate_union(loaded, config_from_params(loaded), d1.test, cfg.eval);
    const bool eval_ok = in_memory.f1 == from_disk.f1 &&
                         in_memory.precision == from_disk.precision &&
                         in_memory.recall == from_disk.recall &&
                         in_memory.violation_rate == from_disk.violation_rate;

    fs::remove_all(dir);
    const double elapsed = watch.seconds();
    report(10, dataset_ok && log_ok && ckpt_ok && loaded_equal && eval_ok && elapsed < 300.0,
           fmt("dataset=%g log=%g checkpoint=%g", dataset_ok ? 1.0 : 0.0, log_ok ? 1.0 : 0.0,
               ckpt_ok ? 1.0 : 0.0) +
               fmt(" load=%g eval-roundtrip=%g elapsed=%.1fs", loaded_equal ? 1.0 : 0.0,
                   eval_ok ? 1.0 : 0.0, elapsed));
}
