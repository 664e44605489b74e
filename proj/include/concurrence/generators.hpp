#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "concurrence/dataset.hpp"
#include "concurrence/kernels.hpp"
#include "concurrence/rng.hpp"

namespace concurrence {

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Benchmark generator: events with a linearly ramped rate, convolved with a
/// wavelet per signal, y circularly lagged, plus event-driven noise.
struct WaveletDatasetConfig {
    std::size_t n_pairs = 500;
    std::size_t length = 1000;
    double event_rate = 0.02;   ///< mean events per frame
    double ramp = 0.9;          ///< per-pair relative slope drawn from U[-ramp, ramp]
    std::size_t lag_min = 0;
    std::size_t lag_max = 50;
    double p_alpha = 1.0;
    double p_beta = 1.0;
    double snr = 1.0;           ///< std(clean) / std(noise); infinity disables noise
    double scale_min = 2.0;     ///< random kernel scales are drawn from [scale_min, scale_max]
    double scale_max = 12.0;
    std::vector<std::string> families;  ///< empty: every wavelet family
    std::optional<KernelSpec> k1;       ///< fixed kernels override the random draw
    std::optional<KernelSpec> k2;
    std::optional<KernelSpec> noise_x;
    std::optional<KernelSpec> noise_y;
    std::uint64_t seed = 0;

    void validate() const;
    Json to_json() const;
};

Dataset gen_wavelet_dataset(const WaveletDatasetConfig& config, std::size_t workers = 1);

/// Controlled-dependence generator: master events are shared with
/// probability xi, otherwise given to x or y with equal odds.
struct XiDatasetConfig {
    std::size_t n_pairs = 200;
    std::size_t length = 1000;
    double xi = 1.0;
    double event_rate = 0.02;  ///< per-signal marginal rate
    KernelSpec kernel_x{KernelFamily::ricker, 1, 3.0, 0};
    KernelSpec kernel_y{KernelFamily::gauss_deriv, 1, 3.0, 0};
    std::size_t lag = 0;       ///< circular lag applied to y
    double snr = kNoNoise;     ///< additive white Gaussian noise
    std::uint64_t seed = 0;

    void validate() const;
    Json to_json() const;
};

Dataset gen_xi_dataset(const XiDatasetConfig& config, std::size_t workers = 1);

/// Fraction of master events that were shared, for auditing the construction.
struct XiEventStats {
    std::size_t master_events = 0;
    std::size_t shared_events = 0;
    std::size_t x_events = 0;
    std::size_t y_events = 0;
    std::size_t coincident = 0;  ///< frames where x and y both fire
};

/// Event assignment for one signal pair of length T, exposed for tests.
void draw_xi_events(double xi, double event_rate, std::size_t length, Rng& rng, std::vector<unsigned char>& hx,
                    std::vector<unsigned char>& hy, XiEventStats* stats = nullptr);

/// clean + noise scaled so std(clean) / std(scaled noise) == snr. Infinite
/// snr returns clean unchanged.
std::vector<double> apply_noise_snr(std::span<const double> clean, double snr, std::span<const double> noise);

/// Same with white Gaussian noise drawn from rng.
std::vector<double> apply_noise_snr(std::span<const double> clean, double snr, Rng& rng);

/// Zero-padded convolution aligned so output[t] is centred on input[t].
std::vector<double> convolve_same(std::span<const double> signal, std::span<const double> kernel);

/// out[t] = in[(t - lag) mod T].
std::vector<double> circular_shift(std::span<const double> signal, std::size_t lag);

/// Re-pairs every x with the y of a different pair (a random derangement),
/// destroying any within-pair dependence while keeping the marginals.
Dataset mismatch_pairs(const Dataset& dataset, const Rng& rng);

/// Population standard deviation.
double stddev(std::span<const double> v);

}  // namespace concurrence
