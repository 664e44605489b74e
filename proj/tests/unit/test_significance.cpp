#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "concurrence/error.hpp"
#include "concurrence/significance.hpp"
#include "concurrence/trainer.hpp"
#include "oracles.hpp"

using namespace concurrence;

namespace {

struct Scored {
    std::vector<double> scores;
    std::vector<int> labels;
};

Scored random_scored(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Scored s;
    for (std::size_t i = 0; i < n; ++i) {
        s.scores.push_back(rng.normal());
        s.labels.push_back(static_cast<int>(i % 2));
    }
    return s;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (v.size() - 1));
}

// loc + scale * Gamma(shape), drawn with the standard library as an independent source
std::vector<double> gamma_samples(double shape, double loc, double scale, std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::gamma_distribution<double> g(shape, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = loc + scale * g(gen);
    return v;
}

}  // namespace

TEST_SUITE("significance") {

TEST_CASE("unclipped coefficient") {
    CHECK(ucc(0.40) == doctest::Approx(-0.20).epsilon(1e-15));
    CHECK(ucc(0.50) == 0.0);
    CHECK(ucc(1.0) == 1.0);
    CHECK(ucc(0.0) == -1.0);
    CHECK_THROWS_AS(ucc(1.5), Error);
    CHECK_THROWS_AS(ucc(std::nan("")), Error);
}

TEST_CASE("identity labelling reproduces the observed statistic") {
    const Scored s = random_scored(64, 1);
    CHECK(ucc_from_scores(s.scores, s.labels) == ucc(classification_accuracy(s.scores, s.labels)));
}

TEST_CASE("all positive scores give a degenerate null at zero") {
    std::vector<double> scores(40, 1.0);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 2);
    const auto null = permutation_null(scores, labels, 200, Rng(2));
    for (double v : null) CHECK(v == 0.0);
}

TEST_CASE("null on random scores is centred at zero") {
    const Scored s = random_scored(200, 3);
    const auto null = permutation_null(s.scores, s.labels, 1000, Rng(3));
    CHECK(null.size() == 1000);
    CHECK(std::fabs(mean_of(null)) < 0.05);
    for (double v : null) CHECK((v >= -1.0 && v <= 1.0));
}

TEST_CASE("null does not depend on the worker count") {
    const Scored s = random_scored(100, 4);
    const auto a = permutation_null(s.scores, s.labels, 500, Rng(4), 1);
    const auto b = permutation_null(s.scores, s.labels, 500, Rng(4), 3);
    CHECK(a == b);
}

TEST_CASE("permutation preconditions") {
    Scored s = random_scored(10, 5);
    s.labels[0] = 1;  // now 6 positives of 10
    CHECK_THROWS_WITH_AS(permutation_null(s.scores, s.labels, 10, Rng(5)), doctest::Contains("unbalanced"), Error);
    CHECK_THROWS_AS(permutation_null(std::vector<double>{1.0}, std::vector<int>{1}, 10, Rng(5)), Error);
    const Scored ok = random_scored(10, 5);
    CHECK_THROWS_AS(permutation_null(ok.scores, std::vector<int>(9, 0), 10, Rng(5)), Error);
}

TEST_CASE("null spread shrinks with more segments") {
    // exactly half the scores positive in both sets, so only the size differs
    auto centred = [](std::size_t n, std::uint64_t seed) {
        Scored s = random_scored(n, seed);
        auto sorted = s.scores;
        std::sort(sorted.begin(), sorted.end());
        const double mid = 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        for (auto& v : s.scores) v -= mid;
        return s;
    };
    const Scored small = centred(10, 6);
    const Scored large = centred(40, 6);
    const double sd_small = sd_of(permutation_null(small.scores, small.labels, 20000, Rng(6)));
    const double sd_large = sd_of(permutation_null(large.scores, large.labels, 20000, Rng(7)));
    CHECK(sd_large <= 0.5 * sd_small);
}

TEST_CASE("zero-skew samples fall back to the normal family") {
    std::vector<double> v;
    for (int i = -50; i <= 50; ++i) v.push_back(i * 0.1);
    const NullFit fit = fit_pearson3(v);
    CHECK(fit.family == NullFamily::normal);
    CHECK(fit.location == doctest::Approx(0.0));
    CHECK(fit.fitted_mean() == doctest::Approx(mean_of(v)));
}

TEST_CASE("fit rejects degenerate samples") {
    CHECK_THROWS_AS(fit_pearson3(std::vector<double>(19, 1.0)), Error);
    try {
        fit_pearson3(std::vector<double>(50, 0.3));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

TEST_CASE("gamma shape 4 is recovered") {
    const auto v = gamma_samples(4.0, -3.0, 0.5, 100000, 11);
    const NullFit fit = fit_pearson3(v);
    CHECK(fit.family == NullFamily::pearson3);
    CHECK_FALSE(fit.reflected);
    CHECK(fit.shape >= 3.5);
    CHECK(fit.shape <= 4.5);
    CHECK(fit.scale == doctest::Approx(0.5).epsilon(0.1));

    std::vector<double> neg(v.size());
    std::transform(v.begin(), v.end(), neg.begin(), [](double x) { return -x; });
    const NullFit rfit = fit_pearson3(neg);
    CHECK(rfit.reflected);
    CHECK(rfit.shape == doctest::Approx(fit.shape).epsilon(1e-9));
}

TEST_CASE("moment matching") {
    for (unsigned seed : {1u, 2u, 3u}) {
        for (double shape : {0.7, 4.0, 30.0}) {
            auto v = gamma_samples(shape, 1.0, 2.0, 500, seed);
            if (seed == 2) std::transform(v.begin(), v.end(), v.begin(), [](double x) { return -x; });
            const NullFit fit = fit_pearson3(v);
            const double m = mean_of(v);
            const double var = sd_of(v) * sd_of(v);
            CHECK(oracle::relative_error(fit.fitted_mean(), m, 1e-300) < 1e-9);
            CHECK(oracle::relative_error(fit.fitted_variance(), var, 1e-300) < 1e-9);
            CHECK(fit.mean == m);
        }
    }
}

TEST_CASE("tail matches the integer-shape closed form") {
    NullFit fit;
    fit.family = NullFamily::pearson3;
    fit.location = -1.0;
    fit.scale = 2.0;
    for (int a : {1, 2, 3, 7}) {
        fit.shape = a;
        for (double x : {-0.5, 0.0, 1.0, 4.0, 15.0, 40.0}) {
            const double expected = oracle::gamma_q_integer(a, (x + 1.0) / 2.0);
            CHECK(oracle::relative_error(p_value(x, fit), expected, 1e-300) < 1e-10);
        }
    }
}

TEST_CASE("p at the median and below the support") {
    const auto v = gamma_samples(3.0, 0.0, 1.0, 20000, 21);
    const NullFit fit = fit_pearson3(v);
    CHECK(p_value(fit.quantile(0.5), fit) == doctest::Approx(0.5).epsilon(1e-9));
    auto sorted = v;
    std::nth_element(sorted.begin(), sorted.begin() + 10000, sorted.end());
    CHECK(std::fabs(p_value(sorted[10000], fit) - 0.5) < 0.01);
    CHECK(p_value(fit.location - 0.1, fit) == 1.0);
    CHECK(p_value(fit.location, fit) == 1.0);
}

TEST_CASE("p value is monotone in the observed statistic") {
    const auto pos = gamma_samples(2.0, 0.0, 1.0, 2000, 31);
    auto neg = pos;
    for (auto& x : neg) x = -x;
    std::vector<double> sym;
    for (int i = -100; i <= 100; ++i) sym.push_back(i * 0.01);
    for (const auto& samples : {pos, neg, sym}) {
        const NullFit fit = fit_pearson3(samples);
        double prev = 1.0;
        for (double x = -10.0; x <= 10.0; x += 0.01) {
            const double p = p_value(x, fit);
            CHECK((p >= 0.0 && p <= 1.0));
            CHECK(p <= prev);
            prev = p;
        }
    }
}

TEST_CASE("empirical p counts ties") {
    const std::vector<double> null{0.1, 0.2, 0.2, 0.3};
    CHECK(empirical_p(0.2, null) == doctest::Approx(4.0 / 5.0));
    CHECK(empirical_p(0.31, null) == doctest::Approx(1.0 / 5.0));
    CHECK(empirical_p(-1.0, null) == 1.0);
}

TEST_CASE("observation beyond every null sample") {
    const Scored s = random_scored(400, 41);
    const auto null = permutation_null(s.scores, s.labels, 1000, Rng(41));
    const double beyond = *std::max_element(null.begin(), null.end()) + 4.0 / 400.0;
    const NullFit fit = fit_pearson3(null);
    const double p = p_value(beyond - 2.0 / 400.0, fit);
    const double pe = empirical_p(beyond, null);
    CHECK(pe == doctest::Approx(1.0 / 1001.0));
    CHECK(p < 0.01);
    CHECK(p > pe / 10.0);
    CHECK(p < pe * 10.0);
}

TEST_CASE("fitted and empirical tails agree on a large null") {
    const std::size_t n = 400;
    const Scored s = random_scored(n, 51);
    const auto null = permutation_null(s.scores, s.labels, 10000, Rng(51));
    const NullFit fit = fit_pearson3(null);
    auto sorted = null;
    std::sort(sorted.begin(), sorted.end());
    for (double target : {0.01, 0.05, 0.1, 0.2}) {
        const double observed = sorted[static_cast<std::size_t>((1.0 - target) * sorted.size())];
        const double pe = empirical_p(observed, null);
        const double pf = p_value(observed - 2.0 / n, fit);
        CAPTURE(target);
        CHECK(std::fabs(pf - pe) <= 0.01);
    }
}

TEST_CASE("permutation test bundles both p values") {
    Scored s = random_scored(200, 61);
    // shift the concurrent half so the statistic is clearly positive
    for (std::size_t i = 0; i < s.scores.size(); ++i) s.scores[i] += s.labels[i] ? 0.8 : -0.8;
    const TestResult r = permutation_test(s.scores, s.labels, 1000, Rng(61));
    CHECK(r.n_permutations == 1000);
    REQUIRE(r.fit.has_value());
    CHECK(r.observed > 0.3);
    CHECK(r.empirical_p == doctest::Approx(1.0 / 1001.0));
    CHECK(r.p_value < 1e-6);
    const TestResult few = permutation_test(s.scores, s.labels, 10, Rng(61));
    CHECK_FALSE(few.fit.has_value());
    CHECK(few.p_value == few.empirical_p);
}

}  // TEST_SUITE
