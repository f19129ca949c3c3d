#pragma once

#include <functional>
#include <string>
#include <vector>

#include "url/tensor.hpp"

namespace url {

class Tape;

// Handle to a tape node. Valid for the lifetime of its tape.
struct Var {
    int id = -1;
    Tape* tape = nullptr;

    const Tensor& value() const;
};

// Reverse-mode tape. Records primitive operations as they execute; backward()
// walks the record once and accumulates gradients additively at shared inputs.
// A tape is single-threaded.
class Tape {
public:
    // Closure contract: read grad_at(self), accumulate into grad_accum(parent)
    // for parents where wants_grad(parent) is true.
    using BackwardFn = std::function<void(Tape&, int self)>;

    Var leaf(Tensor value, bool needs_grad = false);
    // Leaf tied to a named store entry; its gradient appears in the GradMap.
    Var param(const ParamStore& store, const std::string& name);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var b);  // [m,n] + [1,n] broadcast over rows
    Var mul(Var a, Var b);         // elementwise
    Var scale(Var a, double c);
    Var relu(Var a);
    Var tanh_op(Var a);
    Var log_op(Var a);
    Var log_clamped(Var a, double floor);
    Var row_softmax(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var gather_rows(Var a, std::vector<std::int64_t> rows);
    Var concat(Var a, Var b, int axis);
    Var dropout(Var a, const Tensor& mask, double rate);

    // Escape hatch for fused ops (the spline convolutions) that provide their
    // own backward rule.
    Var custom(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

    // Reverse sweep from a scalar loss. Returns gradients for every named
    // parameter leaf; entries of `store` that never reached the loss get zero
    // gradients.
    GradMap backward(Var loss, const ParamStore* store = nullptr);

    const Tensor& value_at(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad_at(int id) const;
    bool wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    Tensor& grad_accum(int id);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;
        bool needs_grad = false;
        std::string param_name;
    };

    Var emplace(Tensor value, const std::vector<Var>& parents, BackwardFn backward);
    void check_same_tape(Var v) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Max over all parameter coordinates of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|)
// between reverse-mode and central finite differences. `f` must be
// deterministic (dropout disabled).
double grad_check(const std::function<Var(Tape&, const ParamStore&)>& f, const ParamStore& store,
                  double h = 1e-5);

}  // namespace url
