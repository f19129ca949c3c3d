#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "url/errors.hpp"

namespace url {

// Dense row-major double tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape, double fill = 0.0);
    static Tensor from_values(std::vector<std::int64_t> shape, std::vector<double> values);
    static Tensor scalar(double v) { return from_values({1}, {v}); }
    static Tensor row(std::vector<double> values);
    static Tensor matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool is_scalar() const { return values_.size() == 1; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
    double& at(std::int64_t r, std::int64_t c) { return values_[index2(r, c)]; }
    double at(std::int64_t r, std::int64_t c) const { return values_[index2(r, c)]; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const;
    bool operator==(const Tensor& other) const = default;

private:
    std::size_t index2(std::int64_t r, std::int64_t c) const {
        return static_cast<std::size_t>(r * shape_[1] + c);
    }

    std::vector<std::int64_t> shape_;
    std::vector<double> values_;
};

// Named parameter tensors (encoder weights and universe embeddings). Ordered
// by name so iteration and serialization are deterministic.
class ParamStore {
public:
    void insert(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return params_.count(name) > 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    bool operator==(const ParamStore& other) const = default;

private:
    std::map<std::string, Tensor> params_;
};

using GradMap = std::map<std::string, Tensor>;

}  // namespace url
