#include <doctest.h>

#include <cmath>
#include <numeric>

#include "concurrence/baselines.hpp"
#include "concurrence/error.hpp"
#include "concurrence/generators.hpp"
#include "oracles.hpp"

using namespace concurrence;

namespace {

std::vector<double> normals(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

Dataset paired(std::size_t n, std::size_t length, bool copy, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        SignalPair p;
        p.id = i;
        p.length = length;
        p.x = normals(length, rng);
        p.y = copy ? p.x : normals(length, rng);
        d.pairs.push_back(std::move(p));
    }
    return d;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("pearson on exact linear relations") {
    Rng rng(1);
    const auto x = normals(100, rng);
    std::vector<double> y(100), z(100);
    for (std::size_t i = 0; i < 100; ++i) {
        y[i] = 2.0 * x[i] + 1.0;
        z[i] = -x[i];
    }
    CHECK(pearson_r(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson_r(x, z) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_THROWS_AS(pearson_r(x, std::vector<double>(100, 3.0)), Error);
}

TEST_CASE("shared events through different zero-mean kernels are nearly uncorrelated") {
    XiDatasetConfig c;
    c.n_pairs = 20;
    c.length = 1000;
    c.xi = 1.0;
    c.seed = 2;
    c.kernel_x = parse_kernel("gauss1", 4.0);
    c.kernel_y = parse_kernel("gauss2", 4.0);
    const Dataset d = gen_xi_dataset(c);
    std::size_t small = 0;
    for (const auto& p : d.pairs) small += std::fabs(pearson_r(p.x, p.y)) < 0.1 ? 1 : 0;
    CHECK(small >= 16);
}

TEST_CASE("wcc finds a lagged copy") {
    Rng rng(3);
    const auto x = normals(400, rng);
    std::vector<double> y(400);
    for (std::size_t t = 0; t < 400; ++t) y[t] = x[(t + 400 - 3) % 400];
    CHECK(wcc(x, y, 50, 5) > 0.9);
    CHECK(wcc(x, normals(400, rng), 50, 5) < 0.4);
}

TEST_CASE("wcc without lags is the mean windowed correlation") {
    Rng rng(4);
    const auto x = normals(300, rng);
    auto y = normals(300, rng);
    for (std::size_t t = 0; t < 300; ++t) y[t] += 0.5 * x[t];
    double sum = 0.0;
    for (std::size_t w = 0; w < 6; ++w) {
        sum += std::fabs(pearson_r(std::span<const double>(x).subspan(w * 50, 50),
                                   std::span<const double>(y).subspan(w * 50, 50)));
    }
    CHECK(wcc(x, y, 50, 0) == doctest::Approx(sum / 6.0).epsilon(1e-12));
    CHECK_THROWS_AS(wcc(std::vector<double>(100, 1.0), std::vector<double>(100, 2.0), 20, 0), Error);
}

TEST_CASE("distance correlation matches the definition on small inputs") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.below(6));
        const auto x = normals(n, rng);
        const auto y = normals(n, rng);
        CHECK(std::fabs(distance_correlation(x, y).value - oracle::dcor(x, y)) < 1e-12);
    }
}

TEST_CASE("distance correlation properties") {
    Rng rng(6);
    const auto x = normals(50, rng);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = -3.0 * x[i] + 2.0;
    CHECK(distance_correlation(x, y).value == doctest::Approx(1.0).epsilon(1e-9));
    const DcorResult flat = distance_correlation(x, std::vector<double>(50, 1.0));
    CHECK(flat.value == 0.0);
    CHECK(flat.degenerate);
}

TEST_CASE("median bandwidth") {
    const std::vector<double> v{0.0, 1.0, 1.0, 3.0};
    // nonzero distances: 1, 1, 3, 2, 2 -> median 2
    CHECK(median_bandwidth(v) == 2.0);
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const auto r = normals(7, rng);
        CHECK(median_bandwidth(r) == oracle::median_nonzero_distance(r));
    }
    CHECK(median_bandwidth(std::vector<double>(5, 2.0)) == 0.0);
}

TEST_CASE("hsic matches explicit centring matrices on small inputs") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(rng.below(5));
        const auto x = normals(n, rng);
        const auto y = normals(n, rng);
        const double expected =
            oracle::hsic(x, y, oracle::median_nonzero_distance(x), oracle::median_nonzero_distance(y));
        CHECK(std::fabs(hsic_gaussian(x, y) - expected) < 1e-12);
    }
    const std::vector<double> a{0.0, 1.0, 3.0, 4.5};
    const std::vector<double> b{2.0, -1.0, 0.5, 0.0};
    CHECK(std::fabs(hsic_gaussian(a, b) - oracle::hsic(a, b, 2.5, 1.5)) < 1e-12);
}

TEST_CASE("hsic degenerate inputs") {
    const std::vector<double> flat(6, 1.0);
    CHECK_THROWS_AS(hsic_gaussian(flat, flat), Error);
    Rng rng(9);
    const auto y = normals(6, rng);
    // a constant signal gives an all-ones kernel that centring removes
    CHECK(std::fabs(hsic_gaussian(flat, y)) < 1e-15);
}

TEST_CASE("hsic of a copy beats its shuffle null") {
    Rng rng(10);
    const auto x = normals(60, rng);
    const double observed = hsic_gaussian(x, x);
    std::vector<double> null;
    for (int k = 0; k < 200; ++k) {
        auto y = x;
        rng.shuffle(std::span<double>(y));
        null.push_back(hsic_gaussian(x, y));
    }
    std::sort(null.begin(), null.end());
    CHECK(observed > null[190]);
}

TEST_CASE("mutual information of identical discrete uniforms is ln B") {
    for (std::size_t b : {2u, 3u, 4u, 7u, 16u}) {
        std::vector<double> x;
        for (std::size_t t = 0; t < 40 * b; ++t) x.push_back(static_cast<double>(t % b));
        CHECK(std::fabs(mutual_information_binned(x, x, b) - std::log(static_cast<double>(b))) < 1e-12);
    }
}

TEST_CASE("mutual information of independent uniforms stays under the bias bound") {
    Rng rng(11);
    const std::size_t n = 20000, b = 8;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    const double df = static_cast<double>((b - 1) * (b - 1));
    const double bound = df / (2.0 * n) + 3.0 * std::sqrt(2.0 * df) / (2.0 * n);
    const double mi = mutual_information_binned(x, y, b);
    CHECK(mi >= 0.0);
    CHECK(mi < bound);
    CHECK(mi == mutual_information_binned(y, x, b));
}

TEST_CASE("mutual information errors") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK_THROWS_AS(mutual_information_binned(x, x, 1), Error);
    CHECK_THROWS_AS(mutual_information_binned(x, std::vector<double>(4, 0.0), 2), Error);
    CHECK_THROWS_AS(mutual_information_binned(x, x, 5), Error);
}

TEST_CASE("conditional mi on a de Bruijn walk is ln B") {
    for (int b : {2, 3, 4, 6}) {
        auto seq = oracle::de_bruijn(b, 2);
        seq.push_back(seq.front());  // every ordered pair appears exactly once
        std::vector<double> x(seq.begin(), seq.end());
        CHECK(std::fabs(conditional_mi_binned(x, x, static_cast<std::size_t>(b)) - std::log(b)) < 1e-12);
    }
}

TEST_CASE("conditional mi of independent noise vanishes") {
    Rng rng(12);
    const std::size_t n = 50000, b = 4;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    const double df = static_cast<double>((b - 1) * (b - 1) * b * b);
    const double bound = df / (2.0 * n) + 3.0 * std::sqrt(2.0 * df) / (2.0 * n);
    const double cmi = conditional_mi_binned(x, y, b);
    CHECK(cmi >= 0.0);
    CHECK(cmi < bound);
}

TEST_CASE("statistics ignore a shared offset and positive scaling") {
    Rng rng(13);
    auto x = normals(64, rng);
    auto y = normals(64, rng);
    for (std::size_t i = 0; i < 64; ++i) y[i] += x[i] * x[i];
    std::vector<double> xs(64), ys(64), xo(64), yo(64);
    for (std::size_t i = 0; i < 64; ++i) {
        xo[i] = x[i] + 0.5;
        yo[i] = y[i] + 0.5;
        xs[i] = 2.0 * x[i];
        ys[i] = 2.0 * y[i];
    }
    CHECK(pearson_r(xo, yo) == doctest::Approx(pearson_r(x, y)).epsilon(1e-12));
    CHECK(pearson_r(xs, ys) == doctest::Approx(pearson_r(x, y)).epsilon(1e-12));
    CHECK(distance_correlation(xo, yo).value == doctest::Approx(distance_correlation(x, y).value).epsilon(1e-12));
    CHECK(distance_correlation(xs, ys).value == doctest::Approx(distance_correlation(x, y).value).epsilon(1e-12));
    CHECK(hsic_gaussian(xo, yo) == doctest::Approx(hsic_gaussian(x, y)).epsilon(1e-10));
    CHECK(wcc(xo, yo, 16, 3) == doctest::Approx(wcc(x, y, 16, 3)).epsilon(1e-12));
    CHECK(mutual_information_binned(xo, yo, 6) == doctest::Approx(mutual_information_binned(x, y, 6)).epsilon(1e-12));
    CHECK(conditional_mi_binned(xo, yo, 3) == doctest::Approx(conditional_mi_binned(x, y, 3)).epsilon(1e-12));
}

TEST_CASE("method names") {
    CHECK(parse_method("pearson") == Method::pearson);
    CHECK(parse_method("dc") == Method::dcor);
    CHECK(parse_method("cmi") == Method::cmi);
    CHECK_THROWS_WITH_AS(parse_method("mgc"), doctest::Contains("unsupported"), Error);
    CHECK_THROWS_AS(parse_method("kmerf"), Error);
    CHECK_THROWS_AS(parse_method("spearman"), Error);
    for (Method m : {Method::pearson, Method::wcc, Method::dcor, Method::hsic, Method::mi, Method::cmi}) {
        CHECK(parse_method(method_name(m)) == m);
    }
}

TEST_CASE("config defaults and checks") {
    BaselineConfig c;
    CHECK(c.resolved_bins(1000) == 15);  // ceil(sqrt(200))
    CHECK(c.resolved_bins(20) == 4);
    CHECK(c.resolved_bins(100000) == 32);
    CHECK(c.resolved_window(800) == 100);
    c.guard = 50;
    CHECK_THROWS_AS(c.validate(100), Error);
    CHECK_NOTHROW(c.validate(101));
    c.bins = 1;
    CHECK_THROWS_AS(c.validate(1000), Error);
}

TEST_CASE("zero shifts reproduce the observed statistic") {
    const Dataset d = paired(5, 120, false, 14);
    for (Method m : {Method::pearson, Method::wcc, Method::dcor, Method::hsic, Method::mi, Method::cmi}) {
        BaselineConfig c;
        c.method = m;
        c.wcc_max_lag = 5;
        c.guard = 10;
        c.n_permutations = 9;
        const std::vector<std::size_t> zeros(5, 0);
        const TestResult r = baseline_test(d, c, Rng(14));
        CHECK(shifted_dataset_statistic(d, c, zeros) == r.observed);
    }
}

TEST_CASE("a copied signal dominates every shift") {
    const Dataset d = paired(20, 300, true, 15);
    BaselineConfig c;
    c.n_permutations = 199;
    const TestResult r = baseline_test(d, c, Rng(15));
    CHECK(r.observed == doctest::Approx(1.0));
    CHECK(r.p_value == doctest::Approx(1.0 / 200.0));
    CHECK(r.empirical_p == r.p_value);
    CHECK(r.p_value > 0.0);
    c.scheme = NullScheme::pair_shuffle;
    CHECK(baseline_test(d, c, Rng(15)).p_value == doctest::Approx(1.0 / 200.0));
}

TEST_CASE("guard must leave room for shifts") {
    const Dataset d = paired(3, 100, false, 16);
    BaselineConfig c;
    c.guard = 50;
    CHECK_THROWS_AS(baseline_test(d, c, Rng(16)), Error);
}

TEST_CASE("worker count does not change the test") {
    const Dataset d = paired(6, 150, false, 17);
    BaselineConfig c;
    c.method = Method::dcor;
    c.guard = 20;
    c.n_permutations = 50;
    const TestResult a = baseline_test(d, c, Rng(17), 1);
    const TestResult b = baseline_test(d, c, Rng(17), 3);
    CHECK(a.observed == b.observed);
    CHECK(a.p_value == b.p_value);
}

// 100 runs rather than 20: a calibrated test exceeds 2/20 about 7% of the time
TEST_CASE("independent pairs are rarely rejected") {
    for (Method m : {Method::pearson, Method::wcc, Method::dcor, Method::hsic, Method::mi, Method::cmi}) {
        int rejections = 0;
        for (std::uint64_t run = 0; run < 100; ++run) {
            XiDatasetConfig g;
            g.n_pairs = 8;
            g.length = 200;
            g.xi = 0.0;
            g.event_rate = 0.05;
            g.snr = 2.0;
            g.seed = 100 + run;
            const Dataset d = gen_xi_dataset(g);
            BaselineConfig c;
            c.method = m;
            c.guard = 20;
            c.wcc_max_lag = 10;
            c.n_permutations = 99;
            rejections += baseline_test(d, c, Rng(run)).p_value <= 0.05 ? 1 : 0;
        }
        CAPTURE(method_name(m));
        CHECK(rejections <= 10);
    }
}

}  // TEST_SUITE
