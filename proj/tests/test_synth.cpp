#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "url/dataset_io.hpp"
#include "url/rng.hpp"
#include "url/synth.hpp"

using namespace url;

namespace {

SynthConfig tiny_config() {
    SynthConfig c;
    c.n_univ = 8;
    c.feat_dim = 5;
    c.n_train = 6;
    c.n_test = 4;
    return c;
}

SynthConfig noise_free(SynthConfig c) {
    c.sigma_feat = 0.0;
    c.sigma_coo = 0.0;
    c.rot_max_deg = 0.0;
    c.scale_min = c.scale_max = 1.0;
    c.trans_max = 0.0;
    return c;
}

}  // namespace

TEST_CASE("anchor generation is deterministic and in range") {
    const SynthConfig cfg = tiny_config();
    const Anchor a = generate_anchor(cfg, 123);
    const Anchor b = generate_anchor(cfg, 123);
    CHECK(a.features == b.features);
    CHECK(a.coords == b.coords);

    for (std::int64_t i = 0; i < a.features.size(); ++i) {
        CHECK(a.features[i] >= -1.0);
        CHECK(a.features[i] <= 1.0);
    }
    for (const Point2& p : a.coords) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= cfg.canvas);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] <= cfg.canvas);
    }

    const Anchor c = generate_anchor(cfg, 124);
    CHECK(a.features != c.features);
}

TEST_CASE("sample_graph determinism and the noise-free identity case") {
    const SynthConfig cfg = noise_free(tiny_config());
    SynthConfig all_visible = cfg;
    all_visible.p_vis = 1.0;
    const Anchor anchor = generate_anchor(all_visible, 123);

    const Graph g = sample_graph(anchor, all_visible, 123, 0);
    const Graph h = sample_graph(anchor, all_visible, 123, 0);
    CHECK(g.features == h.features);
    CHECK(g.coords == h.coords);
    CHECK(g.labels == h.labels);

    // p_vis = 1 with zero noise and identity affine reproduces the anchor.
    CHECK(g.node_count == all_visible.n_univ);
    CHECK(g.features == anchor.features);
    CHECK(g.coords == anchor.coords);
    for (int v = 0; v < g.node_count; ++v) CHECK((*g.labels)[static_cast<std::size_t>(v)] == v);
}

TEST_CASE("visible node count follows the binomial mean") {
    SynthConfig cfg;
    cfg.n_univ = 25;
    cfg.p_vis = 0.8;
    cfg.feat_dim = 2;
    const Anchor anchor = generate_anchor(cfg, 123);
    double total = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        total += sample_graph(anchor, cfg, 123, static_cast<std::uint64_t>(i)).node_count;
    const double mean = total / draws;
    CHECK(mean > 19.5);
    CHECK(mean < 20.5);
}

TEST_CASE("f1 score conventions") {
    const auto full = PartialPermutation::from_rows(2, {0, 1});
    const auto empty = PartialPermutation::from_rows(2, {-1, -1});

    const F1Score perfect = f1_score({full}, {full});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const F1Score miss = f1_score({empty}, {full});
    CHECK(miss.precision == 0.0);
    CHECK(miss.recall == 0.0);
    CHECK(miss.f1 == 0.0);

    const F1Score vacuous = f1_score({empty}, {empty});
    CHECK(vacuous.f1 == 1.0);

    // 2 predicted, 1 correct, 4 ground-truth matches.
    const auto pred = PartialPermutation::from_rows(4, {0, 2, -1, -1});
    const auto gt = PartialPermutation::from_rows(4, {0, 1, 2, 3});
    const F1Score s = f1_score({pred}, {gt});
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.25));
    CHECK(s.f1 == doctest::Approx(1.0 / 3));
}

TEST_CASE("intersection filter restricts to shared labels") {
    const SynthConfig cfg = tiny_config();
    auto build = [&](std::vector<int> labels, double offset) {
        std::vector<Point2> coords;
        Tensor features({static_cast<std::int64_t>(labels.size()), 2});
        for (std::size_t i = 0; i < labels.size(); ++i) {
            coords.push_back({offset + 10.0 * static_cast<double>(i), 3.0 * ((i * 7) % 5)});
            features.at(static_cast<std::int64_t>(i), 0) = static_cast<double>(labels[i]);
        }
        return make_graph(std::move(coords), std::move(features), std::move(labels));
    };

    const Graph a = build({0, 1, 2}, 0.0);
    const Graph b = build({1, 2, 3}, 5.0);
    const auto filtered = intersection_filter(a, b);
    REQUIRE(filtered.has_value());
    CHECK(*filtered->first.labels == std::vector<int>{1, 2});
    CHECK(*filtered->second.labels == std::vector<int>{1, 2});

    // The filtered ground truth is a full permutation.
    const UniverseMatching gi(cfg.n_univ, *filtered->first.labels);
    const UniverseMatching gj(cfg.n_univ, *filtered->second.labels);
    const auto gt_pair = pairwise_from_universe(gi, gj);
    CHECK(gt_pair.match_count() == gt_pair.rows());

    // Identical label sets: nodes unchanged.
    const auto same = intersection_filter(a, a);
    REQUIRE(same.has_value());
    CHECK(same->first.coords == a.coords);

    // Disjoint labels: empty-pair flag.
    CHECK_FALSE(intersection_filter(build({0, 1, 2}, 0.0), build({5, 6, 7}, 1.0)).has_value());
}

TEST_CASE("accuracy on full matchings") {
    const auto id2 = PartialPermutation::from_rows(2, {0, 1});
    const auto swap2 = PartialPermutation::from_rows(2, {1, 0});
    CHECK(accuracy({id2}, {id2}) == 1.0);
    CHECK(accuracy({swap2}, {id2}) == 0.0);
    const auto half = PartialPermutation::from_rows(2, {0, 1});
    const auto gt_swapped = PartialPermutation::from_rows(2, {0, 1});
    // 1 of 2 rows correct on a single pair.
    CHECK(accuracy({PartialPermutation::from_rows(3, {0, 1, 2})},
                   {PartialPermutation::from_rows(3, {0, 2, 1})}) == doctest::Approx(1.0 / 3));
    CHECK(accuracy({half}, {gt_swapped}) == 1.0);
    CHECK_THROWS_AS(accuracy({PartialPermutation::from_rows(2, {0, -1})}, {id2}), ValidationError);
}

TEST_CASE("violation rate over sampled triples") {
    // The transitivity-violating three-graph example fails its only triple.
    MatchingCollection t({1, 1, 1});
    auto one = PartialPermutation::from_rows(1, {0});
    auto zero = PartialPermutation::from_rows(1, {-1});
    for (int i = 0; i < 3; ++i) t.set_pair(i, i, one);
    t.set_pair(0, 1, one);
    t.set_pair(1, 0, one);
    t.set_pair(1, 2, one);
    t.set_pair(2, 1, one);
    t.set_pair(0, 2, zero);
    t.set_pair(2, 0, zero);
    CHECK(violation_rate(t, 100) == 1.0);

    // A single graph only has the identity to check.
    MatchingCollection solo({2});
    solo.set_pair(0, 0, PartialPermutation::from_rows(2, {0, 1}));
    CHECK(violation_rate(solo, 100) == 0.0);

    // Consistent collections sample clean, including with subsampling.
    std::vector<UniverseMatching> xs;
    for (int i = 0; i < 12; ++i) xs.emplace_back(6, std::vector<int>{i % 6});
    const auto c = MatchingCollection::from_universe(xs);
    CHECK(violation_rate(c, 40) == 0.0);    // sampled (12^3 > 40)
    CHECK(violation_rate(c, 5000) == 0.0);  // exhaustive
}

TEST_CASE("pairwise baseline matching") {
    // Orthonormal rows align with their duplicates at tau = 0.
    const Tensor fi = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const Tensor fj = Tensor::matrix(2, 2, {0, 1, 1, 0});  // rows swapped
    const auto aligned = pairwise_baseline_match(fi, fj, 0.0);
    CHECK(aligned.col_of(0) == 1);
    CHECK(aligned.col_of(1) == 0);

    // Infinite threshold drops everything.
    const auto none =
        pairwise_baseline_match(fi, fj, std::numeric_limits<double>::infinity());
    CHECK(none.match_count() == 0);

    // Similarity [[0.9, 0.1], [0.2, 0.8]] with tau = 0.5 keeps the identity.
    const Tensor a = Tensor::matrix(2, 2, {0.9, 0.1, 0.2, 0.8});
    const Tensor b = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const auto kept = pairwise_baseline_match(a, b, 0.5);
    CHECK(kept.col_of(0) == 0);
    CHECK(kept.col_of(1) == 1);

    // Rectangular pair: LAP runs on the smaller side.
    const Tensor tall = Tensor::matrix(3, 2, {1, 0, 0, 1, 0.5, 0.5});
    const auto rect = pairwise_baseline_match(tall, fi, -10.0);
    CHECK(rect.rows() == 3);
    CHECK(rect.cols() == 2);
    CHECK(rect.match_count() == 2);
}

TEST_CASE("dataset generation/io round trip") {
    SynthConfig cfg = tiny_config();
    cfg.seed = 321;
    const Dataset ds = generate_dataset(cfg);
    REQUIRE(static_cast<int>(ds.train.size()) == cfg.n_train);
    REQUIRE(static_cast<int>(ds.test.size()) == cfg.n_test);

    const auto dir = std::filesystem::temp_directory_path() / "url_dataset_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "data.jsonl").string();
    write_dataset(path, ds);
    const Dataset back = read_dataset(path);

    CHECK(back.config.seed == cfg.seed);
    CHECK(back.anchor.features == ds.anchor.features);
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].features == ds.train[i].features);
        CHECK(back.train[i].coords == ds.train[i].coords);
        CHECK(back.train[i].labels == ds.train[i].labels);
        CHECK(back.train[i].edges == ds.train[i].edges);
    }

    // Rewriting produces identical bytes.
    const std::string path2 = (dir / "data2.jsonl").string();
    write_dataset(path2, back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(!b1.empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("noise-free features are separable by nearest anchor") {
    const SynthConfig cfg = noise_free(tiny_config());
    const Anchor anchor = generate_anchor(cfg, 9);
    for (int g = 0; g < 5; ++g) {
        const Graph graph = sample_graph(anchor, cfg, 9, static_cast<std::uint64_t>(g));
        for (int v = 0; v < graph.node_count; ++v) {
            int best = -1;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int u = 0; u < cfg.n_univ; ++u) {
                double dist = 0.0;
                for (int j = 0; j < cfg.feat_dim; ++j) {
                    const double dv = graph.features.at(v, j) - anchor.features.at(u, j);
                    dist += dv * dv;
                }
                if (dist < best_dist) {
                    best_dist = dist;
                    best = u;
                }
            }
            CHECK(best == (*graph.labels)[static_cast<std::size_t>(v)]);
        }
    }
}
