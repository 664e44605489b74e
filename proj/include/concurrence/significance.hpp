#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "concurrence/rng.hpp"

namespace concurrence {

/// Unclipped concurrence coefficient, 2 * accuracy - 1.
double ucc(double accuracy);

/// UCC of the s > 0 rule against the given labels.
double ucc_from_scores(std::span<const double> scores, std::span<const int> labels);

/// Null UCC values from shuffling labels against fixed scores. Permutation k
/// uses rng.split(k). Labels must be balanced.
std::vector<double> permutation_null(std::span<const double> scores, std::span<const int> labels,
                                     std::size_t n_perms, const Rng& rng, std::size_t workers = 1);

enum class NullFamily { pearson3, normal };

/// Moment-matched Pearson type III (shifted, scaled gamma). For negative
/// skew the fit describes the reflected variable -X and `reflected` is set.
struct NullFit {
    NullFamily family = NullFamily::normal;
    double location = 0.0;
    double scale = 1.0;
    double shape = 0.0;  ///< unused for the normal family
    bool reflected = false;
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  ///< unbiased sample variance
    double skewness = 0.0;  ///< adjusted Fisher-Pearson coefficient

    double fitted_mean() const;
    double fitted_variance() const;
    /// P(X >= x) under the fit.
    double upper_tail(double x) const;
    /// x with P(X <= x) = prob.
    double quantile(double prob) const;
};

inline constexpr double kNormalFallbackSkew = 1e-3;

NullFit fit_pearson3(std::span<const double> samples);

/// Upper-tail probability of the observed statistic under the fit.
double p_value(double observed, const NullFit& fit);

/// (1 + #{null >= observed}) / (n + 1).
double empirical_p(double observed, std::span<const double> null_samples);

struct TestResult {
    double observed = 0.0;
    double p_value = 1.0;  ///< fitted tail when a fit is present, else empirical
    std::size_t n_permutations = 0;
    std::optional<NullFit> fit;
    double empirical_p = 1.0;
};

/// Label-permutation test of the observed UCC of `scores` against `labels`.
/// The fitted p-value includes a half-lattice-step continuity correction.
TestResult permutation_test(std::span<const double> scores, std::span<const int> labels, std::size_t n_perms,
                            const Rng& rng, std::size_t workers = 1);

}  // namespace concurrence
