#include "url/optim.hpp"

#include <cmath>

namespace url {

void Adam::step(ParamStore& store, const GradMap& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));

    for (auto& [name, theta] : store) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw ValidationError("adam: missing gradient for parameter '" + name + "'");
        const Tensor& g = git->second;
        if (!g.same_shape(theta))
            throw ValidationError("adam: gradient shape mismatch for parameter '" + name + "'");

        Tensor& m = m_.try_emplace(name, Tensor(theta.shape())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(theta.shape())).first->second;

        const double decay = 1.0 - config_.lr * config_.weight_decay;
        for (std::int64_t i = 0; i < theta.size(); ++i) {
            theta[i] *= decay;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        if (!theta.all_finite()) throw NumericError("adam: parameter '" + name + "' became non-finite");
    }
}

}  // namespace url
