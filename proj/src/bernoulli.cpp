#include "concurrence/bernoulli.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "concurrence/error.hpp"
#include "concurrence/parallel.hpp"

namespace concurrence {

namespace {

void check_probabilities(double p, double p_alpha, double p_beta, double p_eps_x, double p_eps_y) {
    if (!(p > 0.0 && p < 1.0)) throw config_error("p must lie in (0, 1)");
    if (!(p_alpha > 0.0 && p_alpha <= 1.0)) throw config_error("p_alpha must lie in (0, 1]");
    if (!(p_beta > 0.0 && p_beta <= 1.0)) throw config_error("p_beta must lie in (0, 1]");
    if (!(p_eps_x >= 0.0 && p_eps_x < 1.0)) throw config_error("p_eps_x must lie in [0, 1)");
    if (!(p_eps_y >= 0.0 && p_eps_y < 1.0)) throw config_error("p_eps_y must lie in [0, 1)");
}

// Marginal probability that the recovered x (or y) process fires.
double fire_prob(double p, double gate, double eps) { return 1.0 - (1.0 - p * gate) * (1.0 - eps); }

std::size_t x_offset(const BernoulliConfig& c) {
    return c.tau_prime < 0 ? static_cast<std::size_t>(-c.tau_prime) : 0;
}

// 64 bits of `words` starting at bit `pos` (bits past the end read as 0).
std::uint64_t bits_at(const std::vector<std::uint64_t>& words, std::size_t pos) {
    const std::size_t w = pos >> 6;
    const unsigned s = pos & 63U;
    std::uint64_t lo = w < words.size() ? words[w] >> s : 0;
    if (s != 0 && w + 1 < words.size()) lo |= words[w + 1] << (64U - s);
    return lo;
}

std::size_t and_count(const std::vector<std::uint64_t>& a, std::size_t a_off, const std::vector<std::uint64_t>& b,
                      std::size_t b_off, std::size_t len) {
    std::size_t total = 0;
    for (std::size_t k = 0; k < len; k += 64) {
        std::uint64_t m = bits_at(a, a_off + k) & bits_at(b, b_off + k);
        if (len - k < 64) m &= (std::uint64_t{1} << (len - k)) - 1;
        total += static_cast<std::size_t>(std::popcount(m));
    }
    return total;
}

void fill_bits(std::vector<std::uint64_t>& words, double p, std::size_t n, Rng& rng) {
    for (auto& word : words) word = rng.bernoulli_bits(p);
    if (n % 64 != 0) words.back() &= (std::uint64_t{1} << (n % 64)) - 1;
}

void simulate_stationary(const BernoulliConfig& c, Rng& rng, double& z_plus, double& z_minus) {
    const std::size_t n = c.span();
    const std::size_t nw = (n + 63) / 64;
    std::vector<std::uint64_t> h(nw), a(nw), b(nw), ex(nw), ey(nw);
    fill_bits(h, c.p, n, rng);
    fill_bits(a, c.p_alpha, n, rng);
    fill_bits(b, c.p_beta, n, rng);
    fill_bits(ex, c.p_eps_x, n, rng);
    fill_bits(ey, c.p_eps_y, n, rng);
    std::vector<std::uint64_t> hx(nw), hy(nw);
    for (std::size_t i = 0; i < nw; ++i) {
        hx[i] = (a[i] & h[i]) | ex[i];
        hy[i] = (b[i] & h[i]) | ey[i];
    }
    const std::size_t xo = x_offset(c);
    const auto yo = static_cast<std::size_t>(static_cast<std::int64_t>(xo) + c.tau_prime);
    const double inv_w = 1.0 / static_cast<double>(c.w);
    z_plus = static_cast<double>(and_count(hx, xo, hy, xo, c.w)) * inv_w;
    z_minus = static_cast<double>(and_count(hx, xo, hy, yo, c.w)) * inv_w;
}

void simulate_ramp(const BernoulliConfig& c, Rng& rng, double& z_plus, double& z_minus) {
    const std::size_t n = c.span();
    std::vector<unsigned char> hx(n), hy(n);
    for (std::size_t t = 0; t < n; ++t) {
        const bool h = rng.bernoulli(c.p_at(t));
        const bool a = rng.bernoulli(c.p_alpha);
        const bool b = rng.bernoulli(c.p_beta);
        const bool ex = rng.bernoulli(c.p_eps_x);
        const bool ey = rng.bernoulli(c.p_eps_y);
        hx[t] = static_cast<unsigned char>((a && h) || ex);
        hy[t] = static_cast<unsigned char>((b && h) || ey);
    }
    const std::size_t xo = x_offset(c);
    const auto yo = static_cast<std::size_t>(static_cast<std::int64_t>(xo) + c.tau_prime);
    std::size_t plus = 0;
    std::size_t minus = 0;
    for (std::size_t t = 0; t < c.w; ++t) {
        plus += hx[xo + t] & hy[xo + t];
        minus += hx[xo + t] & hy[yo + t];
    }
    z_plus = static_cast<double>(plus) / static_cast<double>(c.w);
    z_minus = static_cast<double>(minus) / static_cast<double>(c.w);
}

void moments(const std::vector<double>& v, double& mean, double& var) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
}

}  // namespace

void BernoulliConfig::validate() const {
    if (nonstationary) {
        if (!(p_start > 0.0 && p_start < 1.0 && p_end > 0.0 && p_end < 1.0)) {
            throw config_error("ramp endpoints p_start, p_end must lie in (0, 1)");
        }
        check_probabilities(0.5, p_alpha, p_beta, p_eps_x, p_eps_y);
    } else {
        check_probabilities(p, p_alpha, p_beta, p_eps_x, p_eps_y);
    }
    if (w < 1) throw config_error("window length w must be >= 1");
    if (tau_prime == 0) throw config_error("z- requires nonzero lag");
}

std::size_t BernoulliConfig::span() const {
    return w + static_cast<std::size_t>(tau_prime < 0 ? -tau_prime : tau_prime);
}

double BernoulliConfig::p_at(std::size_t t) const {
    if (!nonstationary) return p;
    const std::size_t n = span();
    if (n < 2) return p_start;
    return p_start + (p_end - p_start) * static_cast<double>(t) / static_cast<double>(n - 1);
}

PcResult analytic_pc(double p, double p_alpha, double p_beta, double p_eps_x, double p_eps_y) {
    check_probabilities(p, p_alpha, p_beta, p_eps_x, p_eps_y);
    const double q = 1.0 - p;
    PcResult r;
    r.p_plus = p * (1.0 - (1.0 - p_alpha) * (1.0 - p_eps_x)) * (1.0 - (1.0 - p_beta) * (1.0 - p_eps_y)) +
               q * p_eps_x * p_eps_y;
    r.p_minus = fire_prob(p, p_alpha, p_eps_x) * fire_prob(p, p_beta, p_eps_y);
    r.gap = p * q * p_alpha * p_beta * (1.0 - p_eps_x) * (1.0 - p_eps_y);
    r.theta = 0.5 * (r.p_plus + r.p_minus);
    return r;
}

PcResult analytic_pc(const BernoulliConfig& config) {
    config.validate();
    if (!config.nonstationary) {
        return analytic_pc(config.p, config.p_alpha, config.p_beta, config.p_eps_x, config.p_eps_y);
    }
    const std::size_t xo = x_offset(config);
    const auto yo = static_cast<std::size_t>(static_cast<std::int64_t>(xo) + config.tau_prime);
    PcResult r;
    for (std::size_t t = 0; t < config.w; ++t) {
        const double pt = config.p_at(xo + t);
        const auto at = analytic_pc(pt, config.p_alpha, config.p_beta, config.p_eps_x, config.p_eps_y);
        r.p_plus += at.p_plus;
        r.p_minus += fire_prob(pt, config.p_alpha, config.p_eps_x) *
                     fire_prob(config.p_at(yo + t), config.p_beta, config.p_eps_y);
    }
    r.p_plus /= static_cast<double>(config.w);
    r.p_minus /= static_cast<double>(config.w);
    r.gap = r.p_plus - r.p_minus;
    r.theta = 0.5 * (r.p_plus + r.p_minus);
    return r;
}

double ZSimResult::se_plus() const { return std::sqrt(var_plus / static_cast<double>(trials)); }
double ZSimResult::se_minus() const { return std::sqrt(var_minus / static_cast<double>(trials)); }

ZSimResult simulate_z(const BernoulliConfig& config, std::size_t trials, const Rng& rng, std::size_t workers) {
    config.validate();
    if (trials < 1) throw config_error("trials must be >= 1");
    ZSimResult out;
    out.trials = trials;
    out.z_plus.resize(trials);
    out.z_minus.resize(trials);
    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (trials + kBlock - 1) / kBlock;
    parallel_for(blocks, workers, [&](std::size_t blk) {
        for (std::size_t i = blk * kBlock; i < std::min(trials, (blk + 1) * kBlock); ++i) {
            Rng trial_rng = rng.split(i);
            if (config.nonstationary) {
                simulate_ramp(config, trial_rng, out.z_plus[i], out.z_minus[i]);
            } else {
                simulate_stationary(config, trial_rng, out.z_plus[i], out.z_minus[i]);
            }
        }
    });
    moments(out.z_plus, out.mean_plus, out.var_plus);
    moments(out.z_minus, out.mean_minus, out.var_minus);
    const auto pc = analytic_pc(config);
    out.p_plus = pc.p_plus;
    out.p_minus = pc.p_minus;
    out.theta = pc.theta;
    return out;
}

double classify_by_theta(std::span<const double> z_plus, std::span<const double> z_minus, double theta) {
    if (z_plus.empty() || z_minus.empty()) throw config_error("classify_by_theta needs nonempty sample sets");
    std::size_t below = 0;
    for (double z : z_plus) below += z < theta ? 1 : 0;
    std::size_t above = 0;
    for (double z : z_minus) above += z > theta ? 1 : 0;
    return 0.5 * (static_cast<double>(below) / static_cast<double>(z_plus.size()) +
                  static_cast<double>(above) / static_cast<double>(z_minus.size()));
}

BernoulliConfig scenario(char id, std::size_t w) {
    BernoulliConfig c;
    c.w = w;
    switch (id) {
        case 'a':
            break;
        case 'b':
            c.p_alpha = c.p_beta = 0.5;
            break;
        case 'c':
            c.p_alpha = c.p_beta = 0.5;
            c.p_eps_x = c.p_eps_y = 0.5;
            break;
        case 'd':
            c.nonstationary = true;
            break;
        case 'e':
            c.p_alpha = c.p_beta = 0.5;
            c.p_eps_x = c.p_eps_y = 0.5;
            c.nonstationary = true;
            break;
        default:
            throw config_error(std::string("unknown scenario '") + id + "' (expected a..e)");
    }
    return c;
}

}  // namespace concurrence
