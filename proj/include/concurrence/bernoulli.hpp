#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "concurrence/rng.hpp"

namespace concurrence {

/// Parameters of the event/recovery model: h ~ Bernoulli(p), alpha/beta gate
/// the shared events into x and y, eps_x/eps_y inject spurious events.
struct BernoulliConfig {
    double p = 0.5;
    double p_alpha = 1.0;
    double p_beta = 1.0;
    double p_eps_x = 0.0;
    double p_eps_y = 0.0;
    std::size_t w = 100;
    std::int64_t tau_prime = 1;
    /// When set, p(t) ramps linearly from p_start to p_end over the simulated
    /// span t = 0 .. w + |tau'| - 1 and `p` is ignored.
    bool nonstationary = false;
    double p_start = 0.1;
    double p_end = 0.9;

    void validate() const;
    std::size_t span() const;
    double p_at(std::size_t t) const;
};

struct PcResult {
    double p_plus = 0.0;
    double p_minus = 0.0;
    double gap = 0.0;
    double theta = 0.0;
};

/// Closed forms for the aligned / misaligned product processes.
PcResult analytic_pc(double p, double p_alpha, double p_beta, double p_eps_x, double p_eps_y);

/// Expected z+ and z- for a configuration. Under a ramp these are the time
/// averages of the per-index probabilities over the windows actually used.
PcResult analytic_pc(const BernoulliConfig& config);

struct ZSimResult {
    std::vector<double> z_plus;
    std::vector<double> z_minus;
    double mean_plus = 0.0;
    double mean_minus = 0.0;
    double var_plus = 0.0;   ///< sample variance (n - 1)
    double var_minus = 0.0;
    double p_plus = 0.0;     ///< analytic
    double p_minus = 0.0;
    double theta = 0.0;
    std::size_t trials = 0;

    double se_plus() const;
    double se_minus() const;
};

/// Monte Carlo of z(0) and z(tau'). Trial i draws from rng.split(i), so
/// results do not depend on how trials are distributed over workers.
ZSimResult simulate_z(const BernoulliConfig& config, std::size_t trials, const Rng& rng, std::size_t workers = 1);

/// (fraction of z+ below theta + fraction of z- above theta) / 2.
double classify_by_theta(std::span<const double> z_plus, std::span<const double> z_minus, double theta);

/// Named simulation scenarios 'a'..'e'.
BernoulliConfig scenario(char id, std::size_t w);

}  // namespace concurrence
