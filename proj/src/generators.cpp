#include "concurrence/generators.hpp"

#include <algorithm>
#include <cmath>

#include "concurrence/error.hpp"
#include "concurrence/parallel.hpp"

namespace concurrence {

namespace {

constexpr int kMaxRedraws = 1000;

Json kernel_json(const KernelSpec& spec) {
    return Json{{"family", kernel_name(spec)}, {"scale", spec.scale}, {"support", spec.support_length()}};
}

std::vector<double> events_to_double(const std::vector<unsigned char>& e) { return {e.begin(), e.end()}; }

KernelSpec random_kernel(const WaveletDatasetConfig& c, Rng& rng) {
    const auto& names = c.families.empty() ? wavelet_names() : c.families;
    const auto& name = names[rng.below(names.size())];
    return parse_kernel(name, rng.uniform(c.scale_min, c.scale_max));
}

std::vector<unsigned char> ramp_events(std::size_t length, double base, double slope, Rng& rng) {
    std::vector<unsigned char> h(length);
    for (std::size_t t = 0; t < length; ++t) {
        const double pos = length > 1 ? 2.0 * static_cast<double>(t) / static_cast<double>(length - 1) - 1.0 : 0.0;
        const double rate = std::clamp(base * (1.0 + slope * pos), 0.0, 1.0);
        h[t] = rng.bernoulli(rate) ? 1 : 0;
    }
    return h;
}

Dataset make_dataset(std::size_t n, std::size_t length) {
    Dataset d;
    d.pairs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.pairs[i].id = i;
        d.pairs[i].kx = 1;
        d.pairs[i].ky = 1;
        d.pairs[i].length = length;
    }
    return d;
}

}  // namespace

double stddev(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

std::vector<double> convolve_same(std::span<const double> signal, std::span<const double> kernel) {
    if (kernel.empty()) throw config_error("empty kernel");
    const std::size_t n = signal.size();
    const std::size_t len = kernel.size();
    const auto c = static_cast<std::ptrdiff_t>((len - 1) / 2);
    std::vector<double> out(n, 0.0);
    // Events are sparse, so scatter each nonzero input sample.
    for (std::size_t s = 0; s < n; ++s) {
        const double v = signal[s];
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < len; ++j) {
            const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(s) - c + static_cast<std::ptrdiff_t>(j);
            if (t >= 0 && t < static_cast<std::ptrdiff_t>(n)) out[static_cast<std::size_t>(t)] += v * kernel[j];
        }
    }
    return out;
}

std::vector<double> circular_shift(std::span<const double> signal, std::size_t lag) {
    const std::size_t n = signal.size();
    std::vector<double> out(n);
    if (n == 0) return out;
    lag %= n;
    for (std::size_t t = 0; t < n; ++t) out[(t + lag) % n] = signal[t];
    return out;
}

std::vector<double> apply_noise_snr(std::span<const double> clean, double snr, std::span<const double> noise) {
    if (!(snr > 0.0)) throw config_error("snr must be positive");
    const double sc = stddev(clean);
    if (!(sc > 0.0)) throw numeric_error("clean signal has zero variance; SNR undefined");
    std::vector<double> out(clean.begin(), clean.end());
    if (std::isinf(snr)) return out;
    if (noise.size() != clean.size()) throw config_error("noise and signal lengths differ");
    const double sn = stddev(noise);
    if (!(sn > 0.0)) throw numeric_error("noise source has zero variance");
    const double gain = sc / (snr * sn);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += gain * noise[t];
    return out;
}

std::vector<double> apply_noise_snr(std::span<const double> clean, double snr, Rng& rng) {
    if (std::isinf(snr)) return apply_noise_snr(clean, snr, std::span<const double>{});
    std::vector<double> noise(clean.size());
    for (auto& v : noise) v = rng.normal();
    return apply_noise_snr(clean, snr, noise);
}

void WaveletDatasetConfig::validate() const {
    if (n_pairs < 1) throw config_error("n_pairs must be >= 1");
    if (length < 2) throw config_error("length must be >= 2");
    if (!(event_rate > 0.0 && event_rate < 1.0)) throw config_error("event_rate must lie in (0, 1)");
    if (!(ramp >= 0.0 && ramp <= 1.0)) throw config_error("ramp must lie in [0, 1]");
    if (lag_min > lag_max || lag_max >= length) throw config_error("lag range must satisfy lag_min <= lag_max < T");
    if (!(p_alpha > 0.0 && p_alpha <= 1.0 && p_beta > 0.0 && p_beta <= 1.0)) {
        throw config_error("p_alpha and p_beta must lie in (0, 1]");
    }
    if (!(snr > 0.0)) throw config_error("snr must be positive");
    if (!(scale_min > 0.0 && scale_max >= scale_min)) throw config_error("kernel scale range is invalid");
    for (const auto& f : families) parse_kernel(f, 1.0);
    const std::size_t max_support = static_cast<std::size_t>(std::llround(8.0 * scale_max));
    if (max_support > length) throw config_error("kernel support exceeds signal length");
    for (const auto* k : {&k1, &k2, &noise_x, &noise_y}) {
        if (*k && (*k)->support_length() > length) throw config_error("kernel support exceeds signal length");
    }
}

Json WaveletDatasetConfig::to_json() const {
    Json j{{"n_pairs", n_pairs},
           {"length", length},
           {"event_rate", event_rate},
           {"ramp", ramp},
           {"lag_min", lag_min},
           {"lag_max", lag_max},
           {"p_alpha", p_alpha},
           {"p_beta", p_beta},
           {"snr", std::isinf(snr) ? Json("inf") : Json(snr)},
           {"scale_min", scale_min},
           {"scale_max", scale_max},
           {"families", families.empty() ? wavelet_names() : families},
           {"seed", seed}};
    return j;
}

Dataset gen_wavelet_dataset(const WaveletDatasetConfig& config, std::size_t workers) {
    config.validate();
    const Rng root(config.seed);
    Rng kernel_rng = root.split(0);
    const KernelSpec k1 = config.k1 ? *config.k1 : random_kernel(config, kernel_rng);
    const KernelSpec k2 = config.k2 ? *config.k2 : random_kernel(config, kernel_rng);
    const KernelSpec nx = config.noise_x ? *config.noise_x : random_kernel(config, kernel_rng);
    const KernelSpec ny = config.noise_y ? *config.noise_y : random_kernel(config, kernel_rng);
    for (const auto* k : {&k1, &k2, &nx, &ny}) {
        if (k->support_length() > config.length) throw config_error("kernel support exceeds signal length");
    }
    const auto kv1 = kernel_bank(k1);
    const auto kv2 = kernel_bank(k2);
    const auto kvx = kernel_bank(nx);
    const auto kvy = kernel_bank(ny);

    Dataset d = make_dataset(config.n_pairs, config.length);
    std::vector<std::size_t> lags(config.n_pairs);
    const Rng pair_root = root.split(1);
    parallel_for(config.n_pairs, workers, [&](std::size_t i) {
        Rng rng = pair_root.split(i);
        const double slope = rng.uniform(-config.ramp, config.ramp);
        lags[i] = static_cast<std::size_t>(
            rng.range(static_cast<std::int64_t>(config.lag_min), static_cast<std::int64_t>(config.lag_max)));
        std::vector<double> cx, cy;
        for (int attempt = 0;; ++attempt) {
            if (attempt == kMaxRedraws) throw numeric_error("could not draw a non-constant clean signal");
            const auto h = ramp_events(config.length, config.event_rate, slope, rng);
            std::vector<double> hx(config.length), hy(config.length);
            for (std::size_t t = 0; t < config.length; ++t) {
                hx[t] = h[t] && rng.bernoulli(config.p_alpha) ? 1.0 : 0.0;
                hy[t] = h[t] && rng.bernoulli(config.p_beta) ? 1.0 : 0.0;
            }
            cx = convolve_same(hx, kv1);
            cy = circular_shift(convolve_same(hy, kv2), lags[i]);
            if (stddev(cx) > 0.0 && stddev(cy) > 0.0) break;
        }
        auto noisy = [&](const std::vector<double>& clean, const std::vector<double>& kernel) {
            if (std::isinf(config.snr)) return clean;
            for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
                const auto e = ramp_events(config.length, config.event_rate, 0.0, rng);
                const auto noise = convolve_same(events_to_double(e), kernel);
                if (stddev(noise) > 0.0) return apply_noise_snr(clean, config.snr, noise);
            }
            throw numeric_error("could not draw a non-constant noise signal");
        };
        d.pairs[i].x = noisy(cx, kvx);
        d.pairs[i].y = noisy(cy, kvy);
    });

    d.manifest = Json{{"generator", "wavelet"},
                      {"seed", config.seed},
                      {"n_pairs", config.n_pairs},
                      {"length", config.length},
                      {"kx", 1},
                      {"ky", 1},
                      {"config", config.to_json()},
                      {"kernels", {{"k1", kernel_json(k1)}, {"k2", kernel_json(k2)}, {"noise_x", kernel_json(nx)},
                                   {"noise_y", kernel_json(ny)}}},
                      {"lags", lags}};
    return d;
}

void XiDatasetConfig::validate() const {
    if (n_pairs < 1) throw config_error("n_pairs must be >= 1");
    if (length < 2) throw config_error("length must be >= 2");
    if (!(xi >= 0.0 && xi <= 1.0)) throw config_error("xi must lie in [0, 1]");
    if (!(event_rate > 0.0 && 2.0 * event_rate / (1.0 + xi) <= 1.0)) {
        throw config_error("event_rate must be positive and 2 * rate / (1 + xi) <= 1");
    }
    if (lag >= length) throw config_error("lag must be < T");
    if (!(snr > 0.0)) throw config_error("snr must be positive");
    if (kernel_x.support_length() > length || kernel_y.support_length() > length) {
        throw config_error("kernel support exceeds signal length");
    }
}

Json XiDatasetConfig::to_json() const {
    return Json{{"n_pairs", n_pairs},
                {"length", length},
                {"xi", xi},
                {"event_rate", event_rate},
                {"kernel_x", kernel_json(kernel_x)},
                {"kernel_y", kernel_json(kernel_y)},
                {"lag", lag},
                {"snr", std::isinf(snr) ? Json("inf") : Json(snr)},
                {"seed", seed}};
}

void draw_xi_events(double xi, double event_rate, std::size_t length, Rng& rng, std::vector<unsigned char>& hx,
                    std::vector<unsigned char>& hy, XiEventStats* stats) {
    // A master rate of 2r / (1 + xi) keeps each signal's marginal rate at r.
    const double master = 2.0 * event_rate / (1.0 + xi);
    hx.assign(length, 0);
    hy.assign(length, 0);
    for (std::size_t t = 0; t < length; ++t) {
        if (!rng.bernoulli(master)) continue;
        const bool shared = rng.bernoulli(xi);
        if (shared) {
            hx[t] = hy[t] = 1;
        } else if (rng.bernoulli(0.5)) {
            hx[t] = 1;
        } else {
            hy[t] = 1;
        }
        if (stats) {
            ++stats->master_events;
            stats->shared_events += shared ? 1 : 0;
        }
    }
    if (stats) {
        for (std::size_t t = 0; t < length; ++t) {
            stats->x_events += hx[t];
            stats->y_events += hy[t];
            stats->coincident += hx[t] & hy[t];
        }
    }
}

Dataset gen_xi_dataset(const XiDatasetConfig& config, std::size_t workers) {
    config.validate();
    const auto kx = kernel_bank(config.kernel_x);
    const auto ky = kernel_bank(config.kernel_y);
    Dataset d = make_dataset(config.n_pairs, config.length);
    const Rng pair_root = Rng(config.seed).split(1);
    parallel_for(config.n_pairs, workers, [&](std::size_t i) {
        Rng rng = pair_root.split(i);
        std::vector<unsigned char> hx, hy;
        std::vector<double> cx, cy;
        for (int attempt = 0;; ++attempt) {
            if (attempt == kMaxRedraws) throw numeric_error("could not draw a non-constant clean signal");
            draw_xi_events(config.xi, config.event_rate, config.length, rng, hx, hy);
            cx = convolve_same(events_to_double(hx), kx);
            cy = circular_shift(convolve_same(events_to_double(hy), ky), config.lag);
            if (stddev(cx) > 0.0 && stddev(cy) > 0.0) break;
        }
        d.pairs[i].x = apply_noise_snr(cx, config.snr, rng);
        d.pairs[i].y = apply_noise_snr(cy, config.snr, rng);
    });
    d.manifest = Json{{"generator", "xi"},
                      {"seed", config.seed},
                      {"n_pairs", config.n_pairs},
                      {"length", config.length},
                      {"kx", 1},
                      {"ky", 1},
                      {"config", config.to_json()}};
    return d;
}

Dataset mismatch_pairs(const Dataset& dataset, const Rng& rng) {
    if (dataset.size() < 2) throw config_error("mismatched pairing needs at least 2 pairs");
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng r = rng;
    r.shuffle(std::span<std::size_t>(order));
    Dataset out = dataset;
    // Following the shuffled cycle guarantees no pair keeps its own y.
    for (std::size_t k = 0; k < order.size(); ++k) {
        out.pairs[order[k]].y = dataset.pairs[order[(k + 1) % order.size()]].y;
        out.pairs[order[k]].ky = dataset.pairs[order[(k + 1) % order.size()]].ky;
    }
    out.manifest["mismatched"] = true;
    return out;
}

}  // namespace concurrence
