#include "url/tensor.hpp"

#include <cmath>

namespace url {

namespace {

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 0) throw ValidationError("tensor: negative dimension");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape, double fill) : shape_(std::move(shape)) {
    values_.assign(static_cast<std::size_t>(element_count(shape_)), fill);
}

Tensor Tensor::from_values(std::vector<std::int64_t> shape, std::vector<double> values) {
    Tensor t;
    if (element_count(shape) != static_cast<std::int64_t>(values.size()))
        throw ValidationError("tensor: value count does not match shape");
    t.shape_ = std::move(shape);
    t.values_ = std::move(values);
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    return from_values({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values) {
    return from_values({rows, cols}, std::move(values));
}

bool Tensor::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void ParamStore::insert(const std::string& name, Tensor value) {
    if (contains(name)) throw ValidationError("param store: duplicate name '" + name + "'");
    params_.emplace(name, std::move(value));
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("param store: unknown name '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("param store: unknown name '" + name + "'");
    return it->second;
}

}  // namespace url
