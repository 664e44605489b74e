#include <doctest.h>

#include <cmath>

#include "concurrence/adam.hpp"
#include "concurrence/error.hpp"
#include "concurrence/ops.hpp"
#include "concurrence/rng.hpp"
#include "concurrence/tensor.hpp"
#include "oracles.hpp"

using namespace concurrence;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Checks d(loss)/d(leaf) against central differences for every leaf entry.
double max_fd_error(const std::function<Tensor()>& build, std::vector<Tensor> leaves, double h = 1e-5) {
    for (auto& l : leaves) l.zero_grad();
    backward(build());
    double worst = 0.0;
    for (auto& l : leaves) {
        const std::vector<double> g(l.grad().begin(), l.grad().end());
        for (std::size_t i = 0; i < l.numel(); ++i) {
            const double fd = oracle::central_difference([&] { return build().item(); }, l.data()[i], h);
            worst = std::max(worst, oracle::relative_error(g[i], fd, 1e-6));
        }
    }
    return worst;
}

// sum_i t_i * mix_i as a graph node, so every output entry gets a distinct sensitivity.
Tensor dot(const Tensor& t, const std::vector<double>& mix) {
    double v = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) v += t.data()[i] * mix[i];
    return Tensor::from_op({1}, Buffer{v}, {t}, [mix](Tensor::Node& node) {
        auto& pg = node.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += node.grad[0] * mix[i];
    });
}

}  // namespace

TEST_SUITE("diffcompute") {

TEST_CASE("conv1d output length") {
    CHECK(conv_output_length(10, 3, 2) == 4);
    Tensor in({1, 10}, std::vector<double>(10, 1.0));
    Tensor w({1, 1, 3}, std::vector<double>(3, 1.0));
    Tensor b({1}, {0.0});
    CHECK(conv1d(in, w, b, 2).shape() == Shape{1, 4});
}

TEST_CASE("conv1d shifted identity kernel") {
    Tensor in({1, 6}, {1, 2, 3, 4, 5, 6});
    Tensor w({1, 1, 3}, {0, 1, 0});
    Tensor b({1}, {0.0});
    const auto out = values(conv1d(in, w, b, 1));
    CHECK(out == std::vector<double>{2, 3, 4, 5});
}

TEST_CASE("conv1d matches direct summation") {
    Rng rng(11);
    const auto x = random_vec(2 * 12, rng);
    const auto w = random_vec(3 * 2 * 3, rng);
    const auto b = random_vec(3, rng);
    const auto got = values(conv1d(Tensor({2, 12}, x), Tensor({3, 2, 3}, w), Tensor({3}, b), 2));
    const auto want = oracle::conv1d(x, 2, 12, w, 3, 3, b, 2);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::fabs(got[i] - want[i]) < 1e-12);
}

TEST_CASE("conv1d matches the oracle on all small shapes") {
    Rng rng(12);
    double worst = 0.0;
    for (std::size_t len = 1; len <= 16; ++len) {
        for (std::size_t k = 1; k <= len; ++k) {
            for (std::size_t s = 1; s <= 3; ++s) {
                const std::size_t cin = 1 + (len + k) % 3;
                const std::size_t cout = 1 + (len * k + s) % 3;
                const auto x = random_vec(cin * len, rng);
                const auto w = random_vec(cout * cin * k, rng);
                const auto b = random_vec(cout, rng);
                const auto got = values(conv1d(Tensor({cin, len}, x), Tensor({cout, cin, k}, w), Tensor({cout}, b), s));
                const auto want = oracle::conv1d(x, cin, len, w, cout, k, b, s);
                REQUIRE(got.size() == want.size());
                for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::fabs(got[i] - want[i]));
            }
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("conv1d rejects segments shorter than the kernel") {
    Tensor in({1, 2}, {1, 2});
    Tensor w({1, 1, 3}, {1, 1, 1});
    Tensor b({1}, {0.0});
    CHECK_THROWS_WITH_AS(conv1d(in, w, b, 1), "segment too short for kernel", Error);
}

TEST_CASE("batchnorm train mode standardizes each channel") {
    Rng rng(3);
    // large spread keeps the 1e-5 epsilon below the tolerance
    Tensor x({4, 2, 25}, random_vec(200, rng, 1e3));
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta = Tensor::zeros({2});
    BatchNormStats stats(2);
    const Tensor y = batchnorm1d(x, gamma, beta, stats, Mode::train);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t n = 0; n < 4; ++n) {
            for (std::size_t t = 0; t < 25; ++t) m += y.data()[(n * 2 + c) * 25 + t];
        }
        m /= 100.0;
        for (std::size_t n = 0; n < 4; ++n) {
            for (std::size_t t = 0; t < 25; ++t) v += std::pow(y.data()[(n * 2 + c) * 25 + t] - m, 2);
        }
        v /= 100.0;
        CHECK(std::fabs(m) < 1e-9);
        CHECK(std::fabs(v - 1.0) < 1e-9);
    }
}

TEST_CASE("batchnorm with gamma zero outputs beta") {
    Rng rng(4);
    Tensor x({3, 2, 5}, random_vec(30, rng));
    BatchNormStats stats(2);
    const Tensor y = batchnorm1d(x, Tensor::zeros({2}), Tensor({2}, {0.5, -2.0}), stats, Mode::train);
    for (std::size_t i = 0; i < 30; ++i) CHECK(y.data()[i] == ((i / 5) % 2 == 0 ? 0.5 : -2.0));
}

TEST_CASE("batchnorm eval mode with unit running stats is affine") {
    Rng rng(5);
    Tensor x({2, 1, 6}, random_vec(12, rng));
    BatchNormStats stats(1);
    const Tensor y = batchnorm1d(x, Tensor({1}, {1.5}), Tensor({1}, {0.25}), stats, Mode::eval);
    for (std::size_t i = 0; i < 12; ++i) CHECK(y.data()[i] == doctest::Approx(1.5 * x.data()[i] + 0.25).epsilon(1e-5));
}

TEST_CASE("batchnorm running statistics use momentum 0.1") {
    Tensor x({1, 1, 4}, {1, 2, 3, 4});
    BatchNormStats stats(1);
    batchnorm1d(x, Tensor({1}, {1.0}), Tensor({1}, {0.0}), stats, Mode::train);
    CHECK(stats.running_mean[0] == doctest::Approx(0.1 * 2.5));
    // unbiased batch variance 5/3
    CHECK(stats.running_var[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
}

TEST_CASE("batchnorm rejects degenerate batches") {
    BatchNormStats stats(1);
    Tensor x({1, 1, 1}, {1.0});
    CHECK_THROWS_AS(batchnorm1d(x, Tensor({1}, {1.0}), Tensor({1}, {0.0}), stats, Mode::train), Error);
}

TEST_CASE("relu and dropout basics") {
    Tensor x({3}, {-1, 0, 2});
    CHECK(values(relu(x)) == std::vector<double>{0, 0, 2});
    Rng rng(1);
    CHECK(values(dropout(x, 0.0, Mode::train, rng)) == values(x));
    CHECK(values(dropout(x, 0.5, Mode::eval, rng)) == values(x));
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), Error);
}

TEST_CASE("dropout keeps the expectation") {
    Rng rng(2);
    const std::size_t n = 1000000;
    Tensor ones = Tensor::full({n}, 1.0);
    const Tensor y = dropout(ones, 0.25, Mode::train, rng);
    double m = 0.0;
    for (double v : y.data()) m += v;
    m /= static_cast<double>(n);
    // each element is 0 or 4/3: variance (4/3)^2 * 0.75 * 0.25
    const double se = std::sqrt(16.0 / 9.0 * 0.75 * 0.25 / static_cast<double>(n));
    CHECK(std::fabs(m - 1.0) < 3 * se);
}

TEST_CASE("dropout backward reuses the forward mask") {
    Rng rng(9);
    Tensor x = Tensor::full({64}, 2.0, true);
    const Tensor y = dropout(x, 0.5, Mode::train, rng);
    backward(sum(y));
    for (std::size_t i = 0; i < 64; ++i) CHECK(x.grad()[i] == (y.data()[i] == 0.0 ? 0.0 : 2.0));
}

TEST_CASE("bce with logits") {
    CHECK(bce_with_logits(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_with_logits(50.0, 1) < 1e-20);
    CHECK(std::isfinite(bce_with_logits(-800.0, 1)));
    CHECK(bce_with_logits(-3.0, 0) == doctest::Approx(0.048587351573742).epsilon(1e-10));
    Tensor logit({1}, {0.0}, true);
    const int label = 1;
    backward(bce_with_logits(logit, std::span<const int>(&label, 1)));
    CHECK(logit.grad()[0] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("backward through relu and sum") {
    Tensor x({2}, {-1, 2}, true);
    backward(sum(relu(x)));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK_THROWS_AS(backward(relu(x)), Error);
}

TEST_CASE("op gradients match central differences at 20 random points") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        CAPTURE(trial);
        Tensor x({2, 2, 9}, random_vec(36, rng), true);
        Tensor w({3, 2, 3}, random_vec(18, rng), true);
        Tensor b({3}, random_vec(3, rng), true);
        Tensor gamma({2}, random_vec(2, rng), true);
        Tensor beta({2}, random_vec(2, rng), true);
        Tensor f({2, 2, 5}, random_vec(20, rng), true);
        Tensor g({2, 3, 5}, random_vec(30, rng), true);
        Tensor alpha({2, 3}, random_vec(6, rng), true);
        const std::vector<int> labels{1, 0};
        const auto mix = random_vec(64, rng);
        auto weighted = [&](const Tensor& t) { return dot(t, mix); };
        CHECK(max_fd_error([&] { return weighted(conv1d(x, w, b, 2)); }, {x, w, b}) < 1e-5);
        CHECK(max_fd_error(
                  [&] {
                      BatchNormStats st(2);
                      return weighted(batchnorm1d(x, gamma, beta, st, Mode::train));
                  },
                  {x, gamma, beta}) < 1e-5);
        CHECK(max_fd_error([&] { return weighted(relu(x)); }, {x}) < 1e-5);
        CHECK(max_fd_error([&] { return weighted(cross_covariance(f, g)); }, {f, g}) < 1e-5);
        Tensor c({2, 2, 3}, random_vec(12, rng), true);
        CHECK(max_fd_error([&] { return bce_with_logits(weighted_sum(c, alpha), labels); }, {c, alpha}) < 1e-5);
    }
}

TEST_CASE("cross covariance is invariant to a shared time permutation") {
    Rng rng(8);
    auto f = random_vec(2 * 7, rng);
    auto g = random_vec(3 * 7, rng);
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    std::vector<double> fp(f.size()), gp(g.size());
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t t = 0; t < 7; ++t) fp[r * 7 + t] = f[r * 7 + perm[t]];
    }
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t t = 0; t < 7; ++t) gp[r * 7 + t] = g[r * 7 + perm[t]];
    }
    const auto a = values(cross_covariance(Tensor({1, 2, 7}, f), Tensor({1, 3, 7}, g)));
    const auto b = values(cross_covariance(Tensor({1, 2, 7}, fp), Tensor({1, 3, 7}, gp)));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("forward and backward are bit-reproducible") {
    auto run = [] {
        Rng rng(77);
        Tensor x({3, 2, 20}, random_vec(120, rng), true);
        Tensor w({4, 2, 5}, random_vec(40, rng), true);
        Tensor b({4}, random_vec(4, rng), true);
        BatchNormStats st(2);
        Rng drop(5);
        Tensor y = relu(dropout(conv1d(batchnorm1d(x, Tensor::full({2}, 1.0, true), Tensor::zeros({2}, true), st,
                                                   Mode::train),
                                       w, b, 3),
                                0.25, Mode::train, drop));
        backward(sum(y));
        std::vector<double> out = values(y);
        out.insert(out.end(), w.grad().begin(), w.grad().end());
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{3.0, -0.5};
    AdamMoments m{{0, 0}, {0, 0}};
    adam_update(p, g, m, cfg, 1);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters with zero gradient unchanged") {
    std::vector<double> p{0.3};
    AdamMoments m{{0}, {0}};
    adam_update(p, std::vector<double>{0.0}, m, AdamConfig{}, 1);
    CHECK(p[0] == 0.3);
}

TEST_CASE("adam minimizes a quadratic") {
    Tensor theta({1}, {1.0}, true);
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam opt({theta}, cfg);
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        theta.grad()[0] = 2.0 * theta.data()[0];
        opt.step();
    }
    CHECK(std::fabs(theta.data()[0]) < 0.05);
}

TEST_CASE("adam rejects shape mismatches") {
    std::vector<double> p{1.0, 2.0};
    AdamMoments m{{0}, {0}};
    CHECK_THROWS_AS(adam_update(p, std::vector<double>{1.0, 1.0}, m, AdamConfig{}, 1), Error);
}

}
