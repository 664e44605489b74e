#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "concurrence/dataset.hpp"
#include "concurrence/rng.hpp"
#include "concurrence/significance.hpp"

namespace concurrence {

/// Product-moment correlation. Throws on zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// Windowed cross-correlation: non-overlapping windows of x; for each lag the
/// mean |r| over windows whose lagged y window fits in the signal; the
/// maximum of those means over lags in [-max_lag, max_lag].
double wcc(std::span<const double> x, std::span<const double> y, std::size_t window, std::size_t max_lag);

struct DcorResult {
    double value = 0.0;
    bool degenerate = false;  ///< a signal had zero distance variance
};

DcorResult distance_correlation(std::span<const double> x, std::span<const double> y);

/// Biased HSIC, trace(KHLH) / T^2, Gaussian kernels with median-distance bandwidths.
double hsic_gaussian(std::span<const double> x, std::span<const double> y);

/// Median of the nonzero pairwise distances (0 when there are none).
double median_bandwidth(std::span<const double> v);

/// Plug-in mutual information (nats) from equal-width histograms.
double mutual_information_binned(std::span<const double> x, std::span<const double> y, std::size_t bins);

/// Plug-in I(x[t]; y[t] | x[t-1], y[t-1]) (nats).
double conditional_mi_binned(std::span<const double> x, std::span<const double> y, std::size_t bins);

/// Equal-width bin index of each sample over [min, max].
std::vector<std::size_t> bin_indices(std::span<const double> v, std::size_t bins);

enum class Method { pearson, wcc, dcor, hsic, mi, cmi };
enum class NullScheme { circular_shift, pair_shuffle };

/// Accepts pearson, wcc, dcor (or dc), hsic, mi, cmi. MGC and KMERF are
/// rejected as unsupported.
Method parse_method(const std::string& name);
std::string method_name(Method method);

struct BaselineConfig {
    Method method = Method::pearson;
    std::size_t wcc_window = 0;   ///< 0: T / 8
    std::size_t wcc_max_lag = 50;
    std::size_t bins = 0;         ///< 0: ceil(sqrt(T / 5)) clamped to [4, 32]
    std::size_t n_permutations = 1000;
    NullScheme scheme = NullScheme::circular_shift;
    std::size_t guard = 50;
    bool two_sided = false;       ///< pearson only: test |mean r| instead of mean r

    void validate(std::size_t length) const;
    std::size_t resolved_bins(std::size_t length) const;
    std::size_t resolved_window(std::size_t length) const;
};

/// Statistic of one (x, y) pair. For pearson this is the signed r.
double pair_statistic(std::span<const double> x, std::span<const double> y, const BaselineConfig& config);

/// Mean of the per-pair values; |mean r| for a two-sided pearson test.
double combine_pair_statistics(const BaselineConfig& config, std::span<const double> per_pair);

/// Dataset statistic with y of pair i circularly shifted by shifts[i].
double shifted_dataset_statistic(const Dataset& dataset, const BaselineConfig& config,
                                 std::span<const std::size_t> shifts, std::size_t workers = 1);

/// Permutation test; permutation k draws from rng.split(k). p is the add-one
/// empirical rank p-value.
TestResult baseline_test(const Dataset& dataset, const BaselineConfig& config, const Rng& rng,
                         std::size_t workers = 1);

}  // namespace concurrence
