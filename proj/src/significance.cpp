#include "concurrence/significance.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "concurrence/error.hpp"
#include "concurrence/parallel.hpp"

namespace concurrence {

namespace {

void check_pairs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw config_error("scores and labels differ in length");
    if (scores.empty()) throw config_error("no scored segments");
    for (int l : labels) {
        if (l != 0 && l != 1) throw config_error("labels must be 0 or 1");
    }
}

}  // namespace

double ucc(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw config_error("accuracy must lie in [0, 1]");
    return 2.0 * accuracy - 1.0;
}

double ucc_from_scores(std::span<const double> scores, std::span<const int> labels) {
    check_pairs(scores, labels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] > 0.0) == (labels[i] == 1) ? 1 : 0;
    return ucc(static_cast<double>(hits) / static_cast<double>(scores.size()));
}

std::vector<double> permutation_null(std::span<const double> scores, std::span<const int> labels,
                                     std::size_t n_perms, const Rng& rng, std::size_t workers) {
    check_pairs(scores, labels);
    if (scores.size() < 2) throw config_error("permutation test needs at least 2 segments");
    if (n_perms < 1) throw config_error("n_perms must be >= 1");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (2 * positives != labels.size()) throw config_error("labels are unbalanced; chance accuracy would not be 0.5");
    std::vector<double> out(n_perms);
    parallel_for(n_perms, workers, [&](std::size_t k) {
        std::vector<int> shuffled(labels.begin(), labels.end());
        Rng perm_rng = rng.split(k);
        perm_rng.shuffle(std::span<int>(shuffled));
        out[k] = ucc_from_scores(scores, shuffled);
    });
    return out;
}

double NullFit::fitted_mean() const {
    if (family == NullFamily::normal) return location;
    const double m = location + shape * scale;
    return reflected ? -m : m;
}

double NullFit::fitted_variance() const {
    if (family == NullFamily::normal) return scale * scale;
    return shape * scale * scale;
}

double NullFit::upper_tail(double x) const {
    if (family == NullFamily::normal) {
        return 0.5 * std::erfc((x - location) / (scale * std::sqrt(2.0)));
    }
    if (!reflected) {
        const double z = (x - location) / scale;
        if (z <= 0.0) return 1.0;
        return boost::math::gamma_q(shape, z);
    }
    // P(X >= x) = P(-X <= -x)
    const double z = (-x - location) / scale;
    if (z <= 0.0) return 0.0;
    return boost::math::gamma_p(shape, z);
}

double NullFit::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0)) throw config_error("quantile probability must lie in (0, 1)");
    if (family == NullFamily::normal) {
        return location + scale * std::sqrt(2.0) * boost::math::erf_inv(2.0 * prob - 1.0);
    }
    if (!reflected) return location + scale * boost::math::gamma_p_inv(shape, prob);
    return -(location + scale * boost::math::gamma_p_inv(shape, 1.0 - prob));
}

NullFit fit_pearson3(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 20) throw config_error("null fit needs at least 20 samples");
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(n);
    double m2 = 0.0;
    double m3 = 0.0;
    for (double s : samples) {
        const double d = s - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo == *hi || !(m2 > 0.0)) throw numeric_error("null samples have zero variance");
    const double nn = static_cast<double>(n);
    NullFit fit;
    fit.n = n;
    fit.mean = mean;
    fit.variance = m2 * nn / (nn - 1.0);
    fit.skewness = m3 / std::pow(m2, 1.5) * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
    const double sd = std::sqrt(fit.variance);
    const double g = fit.skewness;
    if (std::abs(g) < kNormalFallbackSkew) {
        fit.family = NullFamily::normal;
        fit.location = mean;
        fit.scale = sd;
        return fit;
    }
    fit.family = NullFamily::pearson3;
    fit.reflected = g < 0.0;
    const double ag = std::abs(g);
    const double centre = fit.reflected ? -mean : mean;
    fit.shape = 4.0 / (ag * ag);
    fit.scale = sd * ag / 2.0;
    fit.location = centre - 2.0 * sd / ag;
    return fit;
}

double p_value(double observed, const NullFit& fit) { return std::clamp(fit.upper_tail(observed), 0.0, 1.0); }

double empirical_p(double observed, std::span<const double> null_samples) {
    std::size_t ge = 0;
    for (double v : null_samples) ge += v >= observed ? 1 : 0;
    return static_cast<double>(1 + ge) / static_cast<double>(null_samples.size() + 1);
}

TestResult permutation_test(std::span<const double> scores, std::span<const int> labels, std::size_t n_perms,
                            const Rng& rng, std::size_t workers) {
    TestResult result;
    result.observed = ucc_from_scores(scores, labels);
    const auto null = permutation_null(scores, labels, n_perms, rng, workers);
    result.n_permutations = n_perms;
    result.empirical_p = empirical_p(result.observed, null);
    result.p_value = result.empirical_p;
    if (n_perms >= 20) {
        try {
            result.fit = fit_pearson3(null);
            // With balanced labels a permutation changes the number of correct
            // calls in steps of 2, so UCC lives on a lattice of step 4/n. The
            // rank p counts ties, so the tail is read half a step lower.
            const double half_step = 2.0 / static_cast<double>(scores.size());
            result.p_value = p_value(result.observed - half_step, *result.fit);
        } catch (const Error& e) {
            // A degenerate null (e.g. every score on one side of zero) has no
            // continuous fit; the rank p-value stands.
            if (e.kind() != ErrorKind::numeric) throw;
        }
    }
    return result;
}

}  // namespace concurrence
