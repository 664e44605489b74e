#include "concurrence/adam.hpp"

#include <cmath>

#include "concurrence/error.hpp"

namespace concurrence {

void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
                 const AdamConfig& config, std::int64_t step) {
    if (grad.size() != param.size() || moments.m.size() != param.size() || moments.v.size() != param.size()) {
        throw config_error("adam: parameter, gradient and moment shapes differ");
    }
    if (step < 1) throw config_error("adam: step index must be >= 1");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        moments.m[i] = config.beta1 * moments.m[i] + (1.0 - config.beta1) * grad[i];
        moments.v[i] = config.beta2 * moments.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = moments.m[i] / c1;
        const double v_hat = moments.v[i] / c2;
        param[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)) {
    state_.config = config;
    state_.moments.reserve(params_.size());
    for (const auto& p : params_) {
        state_.moments.push_back({std::vector<double>(p.numel(), 0.0), std::vector<double>(p.numel(), 0.0)});
    }
}

void Adam::step() {
    ++state_.step;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        adam_update(p.data(), p.grad(), state_.moments[i], state_.config, state_.step);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace concurrence
