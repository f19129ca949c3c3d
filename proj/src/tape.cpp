#include "url/tape.hpp"

#include <algorithm>
#include <cmath>

namespace url {

namespace {

// C[m,n] += A[m,k] * B[k,n]
void mm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
           std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void mm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
           std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
           std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace

const Tensor& Var::value() const { return tape->value_at(id); }

Var Tape::emplace(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
    if (!value.all_finite()) throw NumericError("tape: operation produced a non-finite value");
    Node node;
    node.value = std::move(value);
    node.backward = std::move(backward);
    for (Var p : parents) {
        check_same_tape(p);
        node.parents.push_back(p.id);
        node.needs_grad = node.needs_grad || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
    }
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::check_same_tape(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw ValidationError("tape: variable does not belong to this tape");
}

Var Tape::leaf(Tensor value, bool needs_grad) {
    Var v = emplace(std::move(value), {}, nullptr);
    nodes_[static_cast<std::size_t>(v.id)].needs_grad = needs_grad;
    return v;
}

Var Tape::param(const ParamStore& store, const std::string& name) {
    for (const Node& n : nodes_)
        if (n.param_name == name && !name.empty())
            throw ValidationError("tape: parameter '" + name + "' registered twice");
    Var v = leaf(store.at(name), true);
    nodes_[static_cast<std::size_t>(v.id)].param_name = name;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0), "matmul: shape mismatch");
    const std::int64_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor C({m, n});
    mm_nn(A.data(), B.data(), C.data(), m, k, n);
    return emplace(std::move(C), {a, b}, [ia = a.id, ib = b.id, m, k, n](Tape& t, int self) {
        const Tensor& G = t.grad_at(self);
        if (t.wants_grad(ia))
            mm_nt(G.data(), t.value_at(ib).data(), t.grad_accum(ia).data(), m, n, k);
        if (t.wants_grad(ib))
            mm_tn(t.value_at(ia).data(), G.data(), t.grad_accum(ib).data(), m, k, n);
    });
}

Var Tape::transpose(Var a) {
    const Tensor& A = a.value();
    require(A.rank() == 2, "transpose: matrix expected");
    const std::int64_t m = A.dim(0), n = A.dim(1);
    Tensor C({n, m});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) C.at(j, i) = A.at(i, j);
    return emplace(std::move(C), {a}, [ia = a.id, m, n](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) da.at(i, j) += G.at(j, i);
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.same_shape(B), "add: shape mismatch");
    Tensor C = A;
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] += B[i];
    return emplace(std::move(C), {a, b}, [ia = a.id, ib = b.id](Tape& t, int self) {
        const Tensor& G = t.grad_at(self);
        for (int id : {ia, ib}) {
            if (!t.wants_grad(id)) continue;
            Tensor& d = t.grad_accum(id);
            for (std::int64_t i = 0; i < G.size(); ++i) d[i] += G[i];
        }
    });
}

Var Tape::add_rowvec(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.rank() == 2 && B.rank() == 2 && B.dim(0) == 1 && B.dim(1) == A.dim(1),
            "add_rowvec: expected [m,n] + [1,n]");
    const std::int64_t m = A.dim(0), n = A.dim(1);
    Tensor C = A;
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) C.at(i, j) += B[j];
    return emplace(std::move(C), {a, b}, [ia = a.id, ib = b.id, m, n](Tape& t, int self) {
        const Tensor& G = t.grad_at(self);
        if (t.wants_grad(ia)) {
            Tensor& da = t.grad_accum(ia);
            for (std::int64_t i = 0; i < G.size(); ++i) da[i] += G[i];
        }
        if (t.wants_grad(ib)) {
            Tensor& db = t.grad_accum(ib);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) db[j] += G.at(i, j);
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.same_shape(B), "mul: shape mismatch");
    Tensor C = A;
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    return emplace(std::move(C), {a, b}, [ia = a.id, ib = b.id](Tape& t, int self) {
        const Tensor& G = t.grad_at(self);
        if (t.wants_grad(ia)) {
            Tensor& da = t.grad_accum(ia);
            const Tensor& B2 = t.value_at(ib);
            for (std::int64_t i = 0; i < G.size(); ++i) da[i] += G[i] * B2[i];
        }
        if (t.wants_grad(ib)) {
            Tensor& db = t.grad_accum(ib);
            const Tensor& A2 = t.value_at(ia);
            for (std::int64_t i = 0; i < G.size(); ++i) db[i] += G[i] * A2[i];
        }
    });
}

Var Tape::scale(Var a, double c) {
    Tensor C = a.value();
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] *= c;
    return emplace(std::move(C), {a}, [ia = a.id, c](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i) da[i] += c * G[i];
    });
}

Var Tape::relu(Var a) {
    Tensor C = a.value();
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] = std::max(0.0, C[i]);
    return emplace(std::move(C), {a}, [ia = a.id](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        const Tensor& A = t.value_at(ia);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i)
            if (A[i] > 0.0) da[i] += G[i];
    });
}

Var Tape::tanh_op(Var a) {
    Tensor C = a.value();
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
    return emplace(std::move(C), {a}, [ia = a.id](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        const Tensor& Y = t.value_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i) da[i] += G[i] * (1.0 - Y[i] * Y[i]);
    });
}

Var Tape::log_op(Var a) {
    Tensor C = a.value();
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] = std::log(C[i]);
    return emplace(std::move(C), {a}, [ia = a.id](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        const Tensor& A = t.value_at(ia);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i) da[i] += G[i] / A[i];
    });
}

Var Tape::log_clamped(Var a, double floor) {
    require(floor > 0.0, "log_clamped: floor must be positive");
    Tensor C = a.value();
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] = std::log(std::max(C[i], floor));
    return emplace(std::move(C), {a}, [ia = a.id, floor](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        const Tensor& A = t.value_at(ia);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i)
            if (A[i] > floor) da[i] += G[i] / A[i];
    });
}

Var Tape::row_softmax(Var a) {
    const Tensor& A = a.value();
    require(A.rank() == 2, "row_softmax: matrix expected");
    const std::int64_t m = A.dim(0), n = A.dim(1);
    require(n > 0, "row_softmax: empty rows");
    Tensor C({m, n});
    for (std::int64_t i = 0; i < m; ++i) {
        double mx = A.at(i, 0);
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
        double z = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double e = std::exp(A.at(i, j) - mx);
            C.at(i, j) = e;
            z += e;
        }
        for (std::int64_t j = 0; j < n; ++j) C.at(i, j) /= z;
    }
    return emplace(std::move(C), {a}, [ia = a.id, m, n](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        const Tensor& Y = t.value_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += G.at(i, j) * Y.at(i, j);
            for (std::int64_t j = 0; j < n; ++j)
                da.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
        }
    });
}

Var Tape::sum(Var a) {
    double acc = 0.0;
    const Tensor& A = a.value();
    for (std::int64_t i = 0; i < A.size(); ++i) acc += A[i];
    return emplace(Tensor::scalar(acc), {a}, [ia = a.id](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const double g = t.grad_at(self)[0];
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < da.size(); ++i) da[i] += g;
    });
}

Var Tape::mean(Var a) {
    const Tensor& A = a.value();
    require(A.size() > 0, "mean: empty tensor");
    double acc = 0.0;
    for (std::int64_t i = 0; i < A.size(); ++i) acc += A[i];
    const double inv = 1.0 / static_cast<double>(A.size());
    return emplace(Tensor::scalar(acc * inv), {a}, [ia = a.id, inv](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const double g = t.grad_at(self)[0] * inv;
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < da.size(); ++i) da[i] += g;
    });
}

Var Tape::gather_rows(Var a, std::vector<std::int64_t> rows) {
    const Tensor& A = a.value();
    require(A.rank() == 2, "gather_rows: matrix expected");
    const std::int64_t n = A.dim(1);
    Tensor C({static_cast<std::int64_t>(rows.size()), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < A.dim(0), "gather_rows: row index out of range");
        for (std::int64_t j = 0; j < n; ++j)
            C.at(static_cast<std::int64_t>(i), j) = A.at(rows[i], j);
    }
    return emplace(std::move(C), {a}, [ia = a.id, rows = std::move(rows), n](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::int64_t j = 0; j < n; ++j)
                da.at(rows[i], j) += G.at(static_cast<std::int64_t>(i), j);
    });
}

Var Tape::concat(Var a, Var b, int axis) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.rank() == 2 && B.rank() == 2, "concat: matrices expected");
    require(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
    Tensor C;
    if (axis == 0) {
        require(A.dim(1) == B.dim(1), "concat: column mismatch");
        C = Tensor({A.dim(0) + B.dim(0), A.dim(1)});
        std::copy(A.data(), A.data() + A.size(), C.data());
        std::copy(B.data(), B.data() + B.size(), C.data() + A.size());
    } else {
        require(A.dim(0) == B.dim(0), "concat: row mismatch");
        C = Tensor({A.dim(0), A.dim(1) + B.dim(1)});
        for (std::int64_t i = 0; i < A.dim(0); ++i) {
            for (std::int64_t j = 0; j < A.dim(1); ++j) C.at(i, j) = A.at(i, j);
            for (std::int64_t j = 0; j < B.dim(1); ++j) C.at(i, A.dim(1) + j) = B.at(i, j);
        }
    }
    const std::int64_t am = A.dim(0), an = A.dim(1);
    return emplace(std::move(C), {a, b}, [ia = a.id, ib = b.id, axis, am, an](Tape& t, int self) {
        const Tensor& G = t.grad_at(self);
        if (axis == 0) {
            if (t.wants_grad(ia)) {
                Tensor& da = t.grad_accum(ia);
                for (std::int64_t i = 0; i < da.size(); ++i) da[i] += G[i];
            }
            if (t.wants_grad(ib)) {
                Tensor& db = t.grad_accum(ib);
                const std::int64_t off = am * an;
                for (std::int64_t i = 0; i < db.size(); ++i) db[i] += G[off + i];
            }
        } else {
            const std::int64_t gn = G.dim(1);
            if (t.wants_grad(ia)) {
                Tensor& da = t.grad_accum(ia);
                for (std::int64_t i = 0; i < am; ++i)
                    for (std::int64_t j = 0; j < an; ++j) da.at(i, j) += G[i * gn + j];
            }
            if (t.wants_grad(ib)) {
                Tensor& db = t.grad_accum(ib);
                const std::int64_t bn = gn - an;
                for (std::int64_t i = 0; i < am; ++i)
                    for (std::int64_t j = 0; j < bn; ++j) db.at(i, j) += G[i * gn + an + j];
            }
        }
    });
}

Var Tape::dropout(Var a, const Tensor& mask, double rate) {
    const Tensor& A = a.value();
    require(A.same_shape(mask), "dropout: mask shape mismatch");
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor C = A;
    for (std::int64_t i = 0; i < C.size(); ++i) C[i] *= mask[i] * keep_scale;
    return emplace(std::move(C), {a}, [ia = a.id, mask, keep_scale](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& G = t.grad_at(self);
        Tensor& da = t.grad_accum(ia);
        for (std::int64_t i = 0; i < G.size(); ++i) da[i] += G[i] * mask[i] * keep_scale;
    });
}

Var Tape::custom(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
    return emplace(std::move(value), parents, std::move(backward));
}

const Tensor& Tape::grad_at(int id) const {
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0) throw ValidationError("tape: gradient not populated");
    return g;
}

Tensor& Tape::grad_accum(int id) {
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0) g = Tensor(nodes_[static_cast<std::size_t>(id)].value.shape());
    return g;
}

GradMap Tape::backward(Var loss, const ParamStore* store) {
    check_same_tape(loss);
    if (!loss.value().is_scalar())
        throw ValidationError("backward: loss must be a scalar");

    grads_.assign(nodes_.size(), Tensor{});
    grad_accum(loss.id)[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& node = nodes_[static_cast<std::size_t>(id)];
        if (!node.backward || !node.needs_grad) continue;
        if (grads_[static_cast<std::size_t>(id)].size() == 0) continue;  // not on the loss path
        node.backward(*this, id);
    }

    GradMap result;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& node = nodes_[id];
        if (node.param_name.empty()) continue;
        Tensor g = grads_[id].size() > 0 ? grads_[id] : Tensor(node.value.shape());
        if (!g.all_finite()) throw NumericError("backward: non-finite gradient");
        result.emplace(node.param_name, std::move(g));
    }
    if (store != nullptr) {
        for (const auto& [name, tensor] : *store)
            if (result.find(name) == result.end()) result.emplace(name, Tensor(tensor.shape()));
    }
    return result;
}

double grad_check(const std::function<Var(Tape&, const ParamStore&)>& f, const ParamStore& store,
                  double h) {
    Tape tape;
    Var loss = f(tape, store);
    GradMap analytic = tape.backward(loss, &store);

    ParamStore probe = store;
    auto eval = [&]() {
        Tape t;
        Var l = f(t, probe);
        return l.value()[0];
    };

    double worst = 0.0;
    for (auto& [name, tensor] : probe) {
        const Tensor& g = analytic.at(name);
        for (std::int64_t i = 0; i < tensor.size(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + h;
            const double up = eval();
            tensor[i] = saved - h;
            const double down = eval();
            tensor[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double err =
                std::abs(g[i] - fd) / std::max({1.0, std::abs(g[i]), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace url
