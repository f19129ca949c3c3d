#pragma once

#include <cstdint>

#include "url/tensor.hpp"

namespace url {

struct AdamConfig {
    double lr = 7e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 3e-7;  // decoupled, applied before the moment update
};

// Adam with bias correction and decoupled weight decay. Moment state is keyed
// by parameter name and created on first use.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::int64_t step_count() const { return step_; }

    // Every store entry must have a gradient; a missing key is a contract error.
    void step(ParamStore& store, const GradMap& grads);

private:
    AdamConfig config_;
    std::int64_t step_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

}  // namespace url
