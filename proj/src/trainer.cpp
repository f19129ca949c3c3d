#include "url/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "url/optim.hpp"
#include "url/rng.hpp"

namespace url {

namespace {

constexpr std::uint64_t kShuffleStream = 3ULL << 32;
constexpr std::uint64_t kDropoutStream = (3ULL << 32) + 1;

struct PairCounts {
    std::int64_t tp = 0, pred = 0, gt = 0;
};

PairCounts pair_counts(const UniverseMatching& pi, const UniverseMatching& pj,
                       const UniverseMatching& gi, const UniverseMatching& gj) {
    const int d = pi.universe_size();
    std::vector<int> pred_row_j(static_cast<std::size_t>(d), -1);
    std::vector<int> gt_row_j(static_cast<std::size_t>(gj.universe_size()), -1);
    for (int b = 0; b < pj.rows(); ++b) pred_row_j[static_cast<std::size_t>(pj.column_of(b))] = b;
    for (int b = 0; b < gj.rows(); ++b) gt_row_j[static_cast<std::size_t>(gj.column_of(b))] = b;

    PairCounts c;
    for (int a = 0; a < pi.rows(); ++a) {
        const int b_pred = pred_row_j[static_cast<std::size_t>(pi.column_of(a))];
        if (b_pred < 0) continue;
        ++c.pred;
        if (gt_row_j[static_cast<std::size_t>(gi.column_of(a))] == b_pred) ++c.tp;
    }
    for (int a = 0; a < gi.rows(); ++a)
        if (gt_row_j[static_cast<std::size_t>(gi.column_of(a))] >= 0) ++c.gt;
    return c;
}

F1Score f1_from_counts(const PairCounts& c) {
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

F1Score multi_f1_from_universe(const std::vector<UniverseMatching>& predicted,
                               const std::vector<UniverseMatching>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw ValidationError("f1: prediction/ground truth count mismatch");
    PairCounts total;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (std::size_t j = i + 1; j < predicted.size(); ++j) {
            const PairCounts c =
                pair_counts(predicted[i], predicted[j], ground_truth[i], ground_truth[j]);
            total.tp += c.tp;
            total.pred += c.pred;
            total.gt += c.gt;
        }
    }
    return f1_from_counts(total);
}

double multi_macro_f1_from_universe(const std::vector<UniverseMatching>& predicted,
                                    const std::vector<UniverseMatching>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw ValidationError("f1: prediction/ground truth count mismatch");
    if (predicted.size() < 2) return 1.0;
    double sum = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (std::size_t j = i + 1; j < predicted.size(); ++j) {
            sum += f1_from_counts(pair_counts(predicted[i], predicted[j], ground_truth[i],
                                              ground_truth[j]))
                       .f1;
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::vector<UniverseMatching> ground_truth_matchings(const std::vector<Graph>& graphs,
                                                     int universe_size) {
    std::vector<UniverseMatching> gt;
    gt.reserve(graphs.size());
    for (const Graph& g : graphs) {
        if (!g.labels) throw ValidationError("ground truth: graph is missing labels");
        gt.emplace_back(universe_size, *g.labels);
    }
    return gt;
}

TrainOutput train_model(const Dataset& dataset, const ExperimentConfig& config,
                        std::ostream* log_stream) {
    const EncoderConfig enc = config.bound_model(dataset.config);
    enc.validate();
    config.train.validate();
    const int n = static_cast<int>(dataset.train.size());
    if (n == 0) throw ValidationError("train: empty training split");

    TrainOutput out;
    out.final_params = init_params(enc, config.train.seed);
    out.best_params = out.final_params;
    out.best_loss = std::numeric_limits<double>::infinity();

    Adam adam(AdamConfig{config.train.lr, config.train.beta1, config.train.beta2,
                         config.train.adam_eps, config.train.weight_decay});
    Rng shuffle_rng = Rng::stream(config.train.seed, kShuffleStream);
    Rng dropout_rng = Rng::stream(config.train.seed, kDropoutStream);
    const double rate = enc.dropout_rate;
    DropoutSampler sampler = nullptr;
    if (rate > 0.0) {
        sampler = [&dropout_rng, rate](const std::vector<std::int64_t>& shape) {
            Tensor mask(shape);
            for (std::int64_t i = 0; i < mask.size(); ++i)
                mask[i] = dropout_rng.bernoulli(1.0 - rate) ? 1.0 : 0.0;
            return mask;
        };
    }

    const std::vector<UniverseMatching> gt = ground_truth_matchings(dataset.train, enc.universe_size);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    int f1_streak = 0;
    bool capped = false;
    for (int epoch = 0; epoch < config.train.epochs && !capped; ++epoch) {
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double epoch_loss_sum = 0.0;
        int seen = 0;
        std::vector<std::optional<UniverseMatching>> predicted(static_cast<std::size_t>(n));
        for (int start = 0; start < n && !capped; start += config.train.batch_size) {
            const int stop = std::min(n, start + config.train.batch_size);
            std::vector<const Graph*> batch;
            for (int b = start; b < stop; ++b)
                batch.push_back(&dataset.train[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])]);

            Tape tape;
            ParamVars vars = ParamVars::bind(tape, out.final_params, enc, true);
            std::vector<Tensor> soft_values;
            Var loss = total_loss_on_tape(tape, vars, enc, batch, sampler, &soft_values);
            GradMap grads = tape.backward(loss, &out.final_params);
            adam.step(out.final_params, grads);
            ++out.steps;

            epoch_loss_sum += loss.value()[0];
            seen += stop - start;
            for (int b = start; b < stop; ++b) {
                const int g = order[static_cast<std::size_t>(b)];
                predicted[static_cast<std::size_t>(g)] =
                    discretize(SoftMatching(std::move(soft_values[static_cast<std::size_t>(b - start)])));
            }
            if (config.train.max_steps > 0 && out.steps >= config.train.max_steps) capped = true;
        }

        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.loss = epoch_loss_sum / static_cast<double>(seen);
        // Under a step cap the final partial epoch scores only the graphs it
        // actually reached.
        std::vector<UniverseMatching> pred_seen, gt_seen;
        for (int g = 0; g < n; ++g) {
            if (!predicted[static_cast<std::size_t>(g)]) continue;
            pred_seen.push_back(*predicted[static_cast<std::size_t>(g)]);
            gt_seen.push_back(gt[static_cast<std::size_t>(g)]);
        }
        entry.train_f1 = multi_f1_from_universe(pred_seen, gt_seen).f1;
        out.log.push_back(entry);
        if (log_stream) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.17g train_f1=%.17g\n", entry.epoch,
                          entry.loss, entry.train_f1);
            (*log_stream) << buf;
        }

        if (entry.loss < out.best_loss) {
            out.best_loss = entry.loss;
            out.best_epoch = epoch;
            out.best_params = out.final_params;
        }
        if (entry.train_f1 >= config.train.early_stop_f1) {
            if (++f1_streak >= config.train.early_stop_patience) {
                out.stopped_early = true;
                break;
            }
        } else {
            f1_streak = 0;
        }
    }
    return out;
}

ParamStore centroid_refit(const ParamStore& params, const EncoderConfig& config,
                          const std::vector<Graph>& train, CentroidMode mode) {
    std::vector<Tensor> encoded;
    encoded.reserve(train.size());
    for (const Graph& g : train) encoded.push_back(encode(params, config, g).features);
    const Tensor centroids = centroid_universe(
        encoded, ground_truth_matchings(train, config.universe_size), config.universe_size, mode);
    ParamStore out = params;
    out.at("universe.embedding") = centroids;
    return out;
}

UnionEvalResult evaluate_union(const ParamStore& params, const EncoderConfig& config,
                               const std::vector<Graph>& test, const EvalConfig& eval) {
    const MatchResult match = match_collection(params, config, test);
    const std::vector<UniverseMatching> gt = ground_truth_matchings(test, config.universe_size);

    UnionEvalResult r;
    const F1Score micro = multi_f1_from_universe(match.hard, gt);
    r.f1 = micro.f1;
    r.precision = micro.precision;
    r.recall = micro.recall;
    r.macro_f1 = multi_macro_f1_from_universe(match.hard, gt);
    r.violation_rate = violation_rate(match.collection(), eval.n_triples, eval.seed);
    return r;
}

namespace {

double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw ValidationError("baseline: no matched-pair similarities");
    std::sort(values.begin(), values.end());
    const double rank = pct / 100.0 * static_cast<double>(values.size());
    std::size_t idx = static_cast<std::size_t>(std::ceil(rank));
    if (idx > 0) --idx;
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

}  // namespace

BaselineEvalResult evaluate_baseline(const ParamStore& params, const EncoderConfig& config,
                                     const std::vector<Graph>& train,
                                     const std::vector<Graph>& test, const EvalConfig& eval) {
    // Threshold: percentile of ground-truth-matched feature similarities on
    // the training split.
    std::vector<Tensor> train_feats;
    train_feats.reserve(train.size());
    for (const Graph& g : train) train_feats.push_back(encode(params, config, g).features);
    std::vector<double> sims;
    for (std::size_t i = 0; i < train.size(); ++i) {
        std::vector<int> row_by_label(static_cast<std::size_t>(config.universe_size), -1);
        for (std::size_t j = i + 1; j < train.size(); ++j) {
            std::fill(row_by_label.begin(), row_by_label.end(), -1);
            const auto& lj = *train[j].labels;
            for (std::size_t b = 0; b < lj.size(); ++b)
                row_by_label[static_cast<std::size_t>(lj[b])] = static_cast<int>(b);
            const auto& li = *train[i].labels;
            const Tensor& fi = train_feats[i];
            const Tensor& fj = train_feats[j];
            const std::int64_t h = fi.dim(1);
            for (std::size_t a = 0; a < li.size(); ++a) {
                const int b = row_by_label[static_cast<std::size_t>(li[a])];
                if (b < 0) continue;
                double dot = 0.0;
                for (std::int64_t p = 0; p < h; ++p)
                    dot += fi.at(static_cast<std::int64_t>(a), p) * fj.at(b, p);
                sims.push_back(dot);
            }
        }
    }
    BaselineEvalResult out;
    out.tau = percentile(std::move(sims), eval.tau_percentile);

    std::vector<Tensor> test_feats;
    test_feats.reserve(test.size());
    for (const Graph& g : test) test_feats.push_back(encode(params, config, g).features);

    const int k = static_cast<int>(test.size());
    std::vector<int> sizes;
    for (const Graph& g : test) sizes.push_back(g.node_count);
    MatchingCollection collection(sizes);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            collection.set_pair(
                i, j,
                pairwise_baseline_match(test_feats[static_cast<std::size_t>(i)],
                                        test_feats[static_cast<std::size_t>(j)], out.tau));

    const std::vector<UniverseMatching> gt = ground_truth_matchings(test, config.universe_size);
    std::vector<PartialPermutation> pred_pairs, gt_pairs;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            pred_pairs.push_back(collection.pair(i, j));
            gt_pairs.push_back(pairwise_from_universe(gt[static_cast<std::size_t>(i)],
                                                      gt[static_cast<std::size_t>(j)]));
        }
    const F1Score micro = f1_score(pred_pairs, gt_pairs);
    out.metrics.f1 = micro.f1;
    out.metrics.precision = micro.precision;
    out.metrics.recall = micro.recall;
    out.metrics.macro_f1 = macro_f1_score(pred_pairs, gt_pairs);
    out.metrics.violation_rate = violation_rate(collection, eval.n_triples, eval.seed);
    return out;
}

double evaluate_intersection(const ParamStore& params, const EncoderConfig& config,
                             const std::vector<Graph>& test) {
    const Tensor& universe = params.at("universe.embedding");
    std::vector<PartialPermutation> pred_pairs, gt_pairs;
    for (std::size_t i = 0; i < test.size(); ++i) {
        for (std::size_t j = i + 1; j < test.size(); ++j) {
            auto filtered = intersection_filter(test[i], test[j]);
            if (!filtered) continue;  // empty-pair flag: skipped
            const auto& [gi, gj] = *filtered;
            const SoftMatching si =
                soft_matching(encode(params, config, gi).features, universe);
            const SoftMatching sj =
                soft_matching(encode(params, config, gj).features, universe);

            // Square LAP over the product of the soft matchings.
            const std::int64_t m = si.values.dim(0);
            const std::int64_t d = si.values.dim(1);
            std::vector<double> scores(static_cast<std::size_t>(m * m));
            for (std::int64_t a = 0; a < m; ++a)
                for (std::int64_t b = 0; b < m; ++b) {
                    double dot = 0.0;
                    for (std::int64_t u = 0; u < d; ++u)
                        dot += si.values.at(a, u) * sj.values.at(b, u);
                    scores[static_cast<std::size_t>(a * m + b)] = dot;
                }
            const LapResult lap = solve_lap_auction(
                ScoreMatrix(static_cast<int>(m), static_cast<int>(m), std::move(scores)));
            pred_pairs.push_back(
                PartialPermutation::from_rows(static_cast<int>(m), lap.matching.assignment()));

            const UniverseMatching ggi(config.universe_size, *gi.labels);
            const UniverseMatching ggj(config.universe_size, *gj.labels);
            gt_pairs.push_back(pairwise_from_universe(ggi, ggj));
        }
    }
    return accuracy(pred_pairs, gt_pairs);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, std::ostream* progress) {
    config.validate();
    std::vector<SweepRow> rows;
    for (double value : config.sweep.effective_values()) {
        ExperimentConfig point = config;
        if (config.sweep.axis == SweepAxis::kVisibility)
            point.synth.p_vis = value;
        else
            point.synth.n_univ = static_cast<int>(value);
        point.train.max_steps = config.sweep.max_steps;
        point.validate();

        const auto start = std::chrono::steady_clock::now();
        const Dataset dataset = generate_dataset(point.synth);
        const TrainOutput trained = train_model(dataset, point, nullptr);
        const UnionEvalResult metrics = evaluate_union(
            trained.best_params, point.bound_model(dataset.config), dataset.test, point.eval);
        const auto end = std::chrono::steady_clock::now();

        SweepRow row;
        row.axis = config.sweep.axis == SweepAxis::kVisibility ? "visibility" : "size";
        row.value = value;
        row.f1 = metrics.f1;
        row.precision = metrics.precision;
        row.recall = metrics.recall;
        row.violation_rate = metrics.violation_rate;
        row.wall_time_ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(end - start)
                .count();
        row.epoch_of_best = trained.best_epoch;
        rows.push_back(row);
        if (progress) {
            (*progress) << "sweep " << row.axis << "=" << row.value << " f1=" << row.f1
                        << " violation_rate=" << row.violation_rate << " wall_time_ms="
                        << row.wall_time_ms << "\n";
        }
    }
    return rows;
}

}  // namespace url
