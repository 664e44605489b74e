#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "concurrence/tensor.hpp"

namespace concurrence {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment buffers for one parameter.
struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
};

struct AdamState {
    AdamConfig config;
    std::vector<AdamMoments> moments;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update of a single parameter buffer. `step` is the
/// 1-based index of the update being applied.
void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
                 const AdamConfig& config, std::int64_t step);

/// Adam over a fixed list of parameter tensors.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config = {});

    /// Applies one update from the gradients currently held by the parameters.
    /// Parameters with no gradient buffer are treated as having zero gradient.
    void step();
    void zero_grad();

    const AdamState& state() const noexcept { return state_; }
    const std::vector<Tensor>& params() const noexcept { return params_; }

private:
    std::vector<Tensor> params_;
    AdamState state_;
};

}  // namespace concurrence
