#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "url/checkpoint.hpp"
#include "url/optim.hpp"
#include "url/rng.hpp"
#include "url/tape.hpp"

using namespace url;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("every primitive backward rule passes grad_check in isolation") {
    Rng rng(5);
    ParamStore store;
    store.insert("a", random_tensor({2, 3}, rng));
    store.insert("b", random_tensor({3, 4}, rng));
    store.insert("c", random_tensor({2, 3}, rng));
    store.insert("r", random_tensor({1, 3}, rng));
    store.insert("pos", random_tensor({2, 3}, rng, 0.5, 2.0));
    store.insert("off_zero", random_tensor({2, 3}, rng, 0.2, 1.0));

    auto check = [&](const char* what, std::function<Var(Tape&, const ParamStore&)> f) {
        const double err = grad_check(f, store, 1e-5);
        INFO(what);
        CHECK(err < 1e-6);
    };

    check("matmul", [](Tape& t, const ParamStore& s) {
        return t.sum(t.matmul(t.param(s, "a"), t.param(s, "b")));
    });
    check("transpose", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.transpose(t.param(s, "a")), t.transpose(t.param(s, "c"))));
    });
    check("add", [](Tape& t, const ParamStore& s) {
        return t.sum(t.add(t.param(s, "a"), t.param(s, "c")));
    });
    check("add_rowvec", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.add_rowvec(t.param(s, "a"), t.param(s, "r")), t.param(s, "c")));
    });
    check("mul", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.param(s, "a"), t.param(s, "c")));
    });
    check("scale", [](Tape& t, const ParamStore& s) {
        return t.sum(t.scale(t.param(s, "a"), -2.5));
    });
    check("relu", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.relu(t.param(s, "off_zero")), t.param(s, "c")));
    });
    check("tanh", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.tanh_op(t.param(s, "a")), t.param(s, "c")));
    });
    check("log", [](Tape& t, const ParamStore& s) { return t.sum(t.log_op(t.param(s, "pos"))); });
    check("log_clamped", [](Tape& t, const ParamStore& s) {
        return t.sum(t.log_clamped(t.param(s, "pos"), 1e-12));
    });
    check("row_softmax", [](Tape& t, const ParamStore& s) {
        return t.sum(t.mul(t.row_softmax(t.param(s, "a")), t.param(s, "c")));
    });
    check("sum", [](Tape& t, const ParamStore& s) { return t.sum(t.param(s, "a")); });
    check("mean", [](Tape& t, const ParamStore& s) { return t.mean(t.param(s, "a")); });
    check("gather_rows", [](Tape& t, const ParamStore& s) {
        return t.sum(t.gather_rows(t.param(s, "a"), {1, 0, 1}));
    });
    check("concat rows", [](Tape& t, const ParamStore& s) {
        return t.sum(t.concat(t.param(s, "a"), t.param(s, "c"), 0));
    });
    check("concat cols", [](Tape& t, const ParamStore& s) {
        return t.sum(t.concat(t.param(s, "a"), t.param(s, "c"), 1));
    });
    check("dropout", [](Tape& t, const ParamStore& s) {
        Tensor mask({2, 3});
        for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = (i % 2 == 0) ? 1.0 : 0.0;
        return t.sum(t.dropout(t.param(s, "a"), mask, 0.35));
    });
}

TEST_CASE("row_softmax values and stability") {
    Tape t;
    const Var u = t.row_softmax(t.leaf(Tensor::row({0, 0, 0})));
    for (int j = 0; j < 3; ++j) CHECK(u.value()[j] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const Var v = t.row_softmax(t.leaf(Tensor::row({std::log(2.0), 0.0})));
    CHECK(v.value()[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(v.value()[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    // Max subtraction keeps huge logits finite.
    const Var w = t.row_softmax(t.leaf(Tensor::row({1000.0, 0.0})));
    CHECK(w.value()[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(w.value().all_finite());

    Rng rng(3);
    Tensor big({20, 13});
    for (std::int64_t i = 0; i < big.size(); ++i) big[i] = rng.uniform(-30.0, 30.0);
    const Var r = t.row_softmax(t.leaf(big));
    for (std::int64_t i = 0; i < 20; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 13; ++j) {
            CHECK(r.value().at(i, j) > 0.0);
            s += r.value().at(i, j);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward analytic examples") {
    // d/dx sum(x*x) = 2x.
    {
        ParamStore s;
        s.insert("x", Tensor::row({3.0}));
        Tape t;
        Var x = t.param(s, "x");
        GradMap g = t.backward(t.sum(t.mul(x, x)), &s);
        CHECK(g.at("x")[0] == doctest::Approx(6.0).epsilon(1e-12));
    }
    // Cross entropy of a row softmax: grad_z = softmax(z) - y.
    {
        ParamStore s;
        s.insert("z", Tensor::row({0.3, -1.2, 2.0}));
        Tape t;
        Var z = t.param(s, "z");
        Tensor y = Tensor::row({0.0, 1.0, 0.0});
        Var soft = t.row_softmax(z);
        Var loss = t.scale(t.sum(t.mul(t.leaf(y), t.log_op(soft))), -1.0);
        GradMap g = t.backward(loss, &s);
        for (int j = 0; j < 3; ++j)
            CHECK(g.at("z")[j] == doctest::Approx(soft.value()[j] - y[j]).epsilon(1e-9));
    }
    // Parameters not on the loss path get zero gradients.
    {
        ParamStore s;
        s.insert("used", Tensor::row({1.0, 2.0}));
        s.insert("detached", Tensor::row({5.0}));
        Tape t;
        Var u = t.param(s, "used");
        t.param(s, "detached");
        GradMap g = t.backward(t.sum(u), &s);
        CHECK(g.at("detached")[0] == 0.0);
        CHECK(g.at("used")[0] == 1.0);
    }
    // Loss must be scalar.
    {
        Tape t;
        Var x = t.leaf(Tensor::row({1.0, 2.0}), true);
        CHECK_THROWS_AS(t.backward(x), ValidationError);
    }
}

TEST_CASE("nan propagation is a numeric error") {
    Tape t;
    Var x = t.leaf(Tensor::row({-1.0}), true);
    CHECK_THROWS_AS(t.log_op(x), NumericError);
}

TEST_CASE("grad_check reference behaviors") {
    Rng rng(9);
    ParamStore s;
    s.insert("q", random_tensor({1, 10}, rng));
    // Quadratic in 10 parameters.
    const double err = grad_check(
        [](Tape& t, const ParamStore& st) {
            Var q = t.param(st, "q");
            return t.sum(t.mul(q, q));
        },
        s, 1e-5);
    CHECK(err < 1e-8);
    // Constant function: zero everywhere.
    const double errc = grad_check(
        [](Tape& t, const ParamStore& st) {
            t.param(st, "q");
            return t.leaf(Tensor::scalar(4.0));
        },
        s, 1e-5);
    CHECK(errc == 0.0);
}

TEST_CASE("adam steps") {
    // Zero gradient and zero decay leave parameters unchanged.
    {
        ParamStore s;
        s.insert("w", Tensor::row({0.7}));
        Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
        GradMap g{{"w", Tensor::row({0.0})}};
        adam.step(s, g);
        CHECK(s.at("w")[0] == 0.7);
    }
    // One unit-gradient step moves by about lr (bias-corrected ratio of 1).
    {
        ParamStore s;
        s.insert("w", Tensor::row({0.0}));
        Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
        GradMap g{{"w", Tensor::row({1.0})}};
        adam.step(s, g);
        CHECK(s.at("w")[0] == doctest::Approx(-0.1).epsilon(1e-6));
    }
    // Decoupled weight decay with zero gradient halves the parameter.
    {
        ParamStore s;
        s.insert("w", Tensor::row({0.8}));
        Adam adam(AdamConfig{1.0, 0.9, 0.999, 1e-8, 0.5});
        GradMap g{{"w", Tensor::row({0.0})}};
        adam.step(s, g);
        CHECK(s.at("w")[0] == doctest::Approx(0.4).epsilon(1e-15));
    }
    // Missing gradient key is a contract error.
    {
        ParamStore s;
        s.insert("w", Tensor::row({0.0}));
        Adam adam(AdamConfig{});
        GradMap empty;
        CHECK_THROWS_AS(adam.step(s, empty), ValidationError);
    }
}

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(13);
    ParamStore store;
    store.insert("alpha", random_tensor({3, 4}, rng));
    store.insert("beta.gamma", random_tensor({2, 2, 5}, rng));
    store.insert("scalar", Tensor::scalar(0.1 + 0.2));

    const auto dir = std::filesystem::temp_directory_path() / "url_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    save_checkpoint(path, store);
    const ParamStore loaded = load_checkpoint(path);
    CHECK(loaded == store);

    // Re-saving the loaded store produces identical bytes.
    const std::string path2 = (dir / "model2.ckpt").string();
    save_checkpoint(path2, loaded);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // Corrupt magic.
    const std::string bad = (dir / "bad.ckpt").string();
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(bad), IoError);
    std::filesystem::remove_all(dir);
}
