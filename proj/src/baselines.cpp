#include "concurrence/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_map>

#include "concurrence/error.hpp"
#include "concurrence/parallel.hpp"

namespace concurrence {

namespace {

double mean_of(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw config_error("x and y must have the same length");
}

// Double-centred matrix of f(v_i, v_j), row-major n x n.
template <class F>
std::vector<double> centred_matrix(std::span<const double> v, F&& f) {
    const std::size_t n = v.size();
    std::vector<double> m(n * n);
    std::vector<double> row(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double e = f(v[i], v[j]);
            m[i * n + j] = e;
            row[i] += e;
        }
        row[i] /= static_cast<double>(n);
        grand += row[i];
    }
    grand /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = m[i * n + j] - row[i] - row[j] + grand;
    }
    return m;
}

// sum_ij a[i, j] * b[(i - s) mod n, (j - s) mod n]
double shifted_inner(const std::vector<double>& a, const std::vector<double>& b, std::size_t n, std::size_t s) {
    s %= n;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a.data() + i * n;
        const double* br = b.data() + ((i + n - s) % n) * n;
        double acc = 0.0;
        // j < s maps to columns n - s + j, j >= s to j - s
        for (std::size_t j = 0; j < s; ++j) acc += ar[j] * br[n - s + j];
        for (std::size_t j = s; j < n; ++j) acc += ar[j] * br[j - s];
        total += acc;
    }
    return total;
}

bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double gaussian_gram_entry(double a, double b, double sigma) {
    const double d = a - b;
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

// Evaluates a pair statistic under circular shifts of y.
class ShiftEvaluator {
public:
    ShiftEvaluator(std::span<const double> x, std::span<const double> y, const BaselineConfig& config)
        : x_(x), y_(y), config_(config), n_(x.size()) {
        require_same_length(x, y);
        switch (config.method) {
            case Method::pearson: {
                xc_.assign(x.begin(), x.end());
                yc_.assign(y.begin(), y.end());
                const double mx = mean_of(x);
                const double my = mean_of(y);
                double sx = 0.0;
                double sy = 0.0;
                for (auto& v : xc_) {
                    v -= mx;
                    sx += v * v;
                }
                for (auto& v : yc_) {
                    v -= my;
                    sy += v * v;
                }
                if (!(sx > 0.0) || !(sy > 0.0)) throw numeric_error("pearson_r: zero variance input");
                norm_ = std::sqrt(sx) * std::sqrt(sy);
                break;
            }
            case Method::dcor: {
                a_ = centred_matrix(x, [](double p, double q) { return std::abs(p - q); });
                b_ = centred_matrix(y, [](double p, double q) { return std::abs(p - q); });
                const double nn = static_cast<double>(n_) * static_cast<double>(n_);
                double vx = 0.0;
                double vy = 0.0;
                for (double v : a_) vx += v * v;
                for (double v : b_) vy += v * v;
                vx /= nn;
                vy /= nn;
                degenerate_ = !(vx > 0.0) || !(vy > 0.0);
                norm_ = degenerate_ ? 0.0 : std::sqrt(vx * vy);
                break;
            }
            case Method::hsic: {
                const bool cx = is_constant(x);
                const bool cy = is_constant(y);
                if (cx && cy) throw numeric_error("hsic: all samples identical; bandwidth undefined");
                // A constant signal has an all-ones Gram matrix at any bandwidth,
                // which centring annihilates.
                degenerate_ = cx || cy;
                if (degenerate_) break;
                const double sx = median_bandwidth(x);
                const double sy = median_bandwidth(y);
                a_ = centred_matrix(x, [sx](double p, double q) { return gaussian_gram_entry(p, q, sx); });
                b_.resize(n_ * n_);
                for (std::size_t i = 0; i < n_; ++i) {
                    for (std::size_t j = 0; j < n_; ++j) b_[i * n_ + j] = gaussian_gram_entry(y[i], y[j], sy);
                }
                break;
            }
            default:
                break;
        }
    }

    double at(std::size_t shift) const {
        shift %= n_;
        const double nn = static_cast<double>(n_) * static_cast<double>(n_);
        switch (config_.method) {
            case Method::pearson: {
                double acc = 0.0;
                for (std::size_t t = 0; t < n_; ++t) acc += xc_[t] * yc_[(t + n_ - shift) % n_];
                return acc / norm_;
            }
            case Method::dcor: {
                if (degenerate_) return 0.0;
                const double dcov2 = std::max(0.0, shifted_inner(a_, b_, n_, shift) / nn);
                return std::sqrt(dcov2 / norm_);
            }
            case Method::hsic:
                if (degenerate_) return 0.0;
                return std::max(0.0, shifted_inner(a_, b_, n_, shift) / nn);
            default: {
                if (shift == 0) return pair_statistic(x_, y_, config_);
                const auto ys = circular_shift_copy(shift);
                return pair_statistic(x_, ys, config_);
            }
        }
    }

    bool degenerate() const { return degenerate_; }

private:
    std::vector<double> circular_shift_copy(std::size_t shift) const {
        std::vector<double> out(n_);
        for (std::size_t t = 0; t < n_; ++t) out[(t + shift) % n_] = y_[t];
        return out;
    }

    std::span<const double> x_;
    std::span<const double> y_;
    BaselineConfig config_;
    std::size_t n_;
    std::vector<double> xc_, yc_, a_, b_;
    double norm_ = 1.0;
    bool degenerate_ = false;
};

void require_single_channel(const Dataset& dataset) {
    if (dataset.empty()) throw config_error("dataset is empty");
    if (dataset.kx() != 1 || dataset.ky() != 1) throw config_error("baseline methods require single-channel signals");
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (x.size() < 2) throw config_error("pearson_r needs at least 2 samples");
    BaselineConfig c;
    c.method = Method::pearson;
    return ShiftEvaluator(x, y, c).at(0);
}

double wcc(std::span<const double> x, std::span<const double> y, std::size_t window, std::size_t max_lag) {
    require_same_length(x, y);
    const std::size_t n = x.size();
    if (window < 2 || window > n) throw config_error("wcc window must lie in [2, T]");
    if (max_lag >= window) throw config_error("wcc max_lag must be < window");
    double best = -1.0;
    const auto lag_limit = static_cast<std::int64_t>(max_lag);
    for (std::int64_t lag = -lag_limit; lag <= lag_limit; ++lag) {
        double total = 0.0;
        std::size_t used = 0;
        for (std::size_t start = 0; start + window <= n; start += window) {
            const std::int64_t ys = static_cast<std::int64_t>(start) + lag;
            if (ys < 0 || ys + static_cast<std::int64_t>(window) > static_cast<std::int64_t>(n)) continue;
            const auto xw = x.subspan(start, window);
            const auto yw = y.subspan(static_cast<std::size_t>(ys), window);
            if (is_constant(xw) || is_constant(yw)) continue;
            total += std::abs(pearson_r(xw, yw));
            ++used;
        }
        if (used > 0) best = std::max(best, total / static_cast<double>(used));
    }
    if (best < 0.0) throw numeric_error("wcc: every window was degenerate");
    return best;
}

DcorResult distance_correlation(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (x.size() < 3) throw config_error("distance_correlation needs T >= 3");
    BaselineConfig c;
    c.method = Method::dcor;
    ShiftEvaluator ev(x, y, c);
    return {ev.at(0), ev.degenerate()};
}

double median_bandwidth(std::span<const double> v) {
    std::vector<double> d;
    d.reserve(v.size() * (v.size() - 1) / 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            const double e = std::abs(v[i] - v[j]);
            if (e > 0.0) d.push_back(e);
        }
    }
    if (d.empty()) return 0.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    const double upper = d[mid];
    if (d.size() % 2 == 1) return upper;
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double hsic_gaussian(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (x.size() < 4) throw config_error("hsic_gaussian needs T >= 4");
    BaselineConfig c;
    c.method = Method::hsic;
    return ShiftEvaluator(x, y, c).at(0);
}

std::vector<std::size_t> bin_indices(std::span<const double> v, std::size_t bins) {
    if (bins < 2) throw config_error("bin count must be >= 2");
    if (v.empty()) throw config_error("cannot bin an empty signal");
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw numeric_error("degenerate range: signal is constant");
    std::vector<std::size_t> out(v.size());
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto b = static_cast<std::size_t>(std::floor((v[i] - lo) / width));
        out[i] = std::min(b, bins - 1);
    }
    return out;
}

double mutual_information_binned(std::span<const double> x, std::span<const double> y, std::size_t bins) {
    require_same_length(x, y);
    if (bins < 2) throw config_error("bin count must be >= 2");
    if (x.size() < bins) throw config_error("mutual information needs T >= bins");
    const auto bx = bin_indices(x, bins);
    const auto by = bin_indices(y, bins);
    std::vector<double> joint(bins * bins, 0.0), px(bins, 0.0), py(bins, 0.0);
    for (std::size_t t = 0; t < bx.size(); ++t) {
        joint[bx[t] * bins + by[t]] += 1.0;
        px[bx[t]] += 1.0;
        py[by[t]] += 1.0;
    }
    // Entropy form over sorted counts, so swapping x and y gives the same bits.
    auto sum_clogc = [](std::vector<double> counts) {
        std::sort(counts.begin(), counts.end());
        double s = 0.0;
        for (double c : counts) s += c > 0.0 ? c * std::log(c) : 0.0;
        return s;
    };
    const double n = static_cast<double>(bx.size());
    const double mi = std::log(n) + (sum_clogc(joint) - (sum_clogc(px) + sum_clogc(py))) / n;
    return std::max(0.0, mi);
}

double conditional_mi_binned(std::span<const double> x, std::span<const double> y, std::size_t bins) {
    require_same_length(x, y);
    if (bins < 2) throw config_error("bin count must be >= 2");
    if (bins > 65535) throw config_error("bin count too large");
    if (x.size() < bins + 1) throw config_error("conditional MI needs T >= bins + 1");
    const auto bx = bin_indices(x, bins);
    const auto by = bin_indices(y, bins);
    const std::uint64_t b = bins;
    std::vector<std::uint64_t> keys;
    keys.reserve(bx.size() - 1);
    std::unordered_map<std::uint64_t, double> n_cd, n_acd, n_bcd;
    for (std::size_t t = 1; t < bx.size(); ++t) {
        const std::uint64_t a = bx[t], bb = by[t], c = bx[t - 1], d = by[t - 1];
        const std::uint64_t cd = c * b + d;
        keys.push_back(((a * b + bb) * b + c) * b + d);
        n_cd[cd] += 1.0;
        n_acd[a * b * b + cd] += 1.0;
        n_bcd[bb * b * b + cd] += 1.0;
    }
    std::sort(keys.begin(), keys.end());
    const double n = static_cast<double>(keys.size());
    double cmi = 0.0;
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        const double count = static_cast<double>(j - i);
        const std::uint64_t k = keys[i];
        const std::uint64_t d = k % b;
        const std::uint64_t c = (k / b) % b;
        const std::uint64_t bb = (k / (b * b)) % b;
        const std::uint64_t a = k / (b * b * b);
        const std::uint64_t cd = c * b + d;
        cmi += count / n * std::log(count * n_cd[cd] / (n_acd[a * b * b + cd] * n_bcd[bb * b * b + cd]));
        i = j;
    }
    return std::max(0.0, cmi);
}

Method parse_method(const std::string& name) {
    if (name == "pearson" || name == "pearson_r") return Method::pearson;
    if (name == "wcc") return Method::wcc;
    if (name == "dcor" || name == "dc" || name == "distance_correlation") return Method::dcor;
    if (name == "hsic" || name == "hsic_gaussian") return Method::hsic;
    if (name == "mi") return Method::mi;
    if (name == "cmi") return Method::cmi;
    if (name == "mgc" || name == "kmerf") {
        throw config_error("unsupported method '" + name +
                           "': MGC and KMERF are out of scope (they depend on an external package)");
    }
    throw config_error("unknown method '" + name + "'");
}

std::string method_name(Method method) {
    switch (method) {
        case Method::pearson: return "pearson";
        case Method::wcc: return "wcc";
        case Method::dcor: return "dcor";
        case Method::hsic: return "hsic";
        case Method::mi: return "mi";
        case Method::cmi: return "cmi";
    }
    return "unknown";
}

void BaselineConfig::validate(std::size_t length) const {
    if (n_permutations < 1) throw config_error("n_permutations must be >= 1");
    if (bins == 1) throw config_error("bin count must be >= 2");
    if (method == Method::wcc) {
        const std::size_t w = resolved_window(length);
        if (w < 2 || w > length) throw config_error("wcc window must lie in [2, T]");
        if (wcc_max_lag >= w) throw config_error("wcc max_lag must be < window");
    }
    if (scheme == NullScheme::circular_shift && 2 * guard >= length) {
        throw config_error("circular-shift guard must be < T/2");
    }
}

std::size_t BaselineConfig::resolved_bins(std::size_t length) const {
    if (bins > 0) return bins;
    const auto b = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(length) / 5.0)));
    return std::clamp<std::size_t>(b, 4, 32);
}

std::size_t BaselineConfig::resolved_window(std::size_t length) const {
    return wcc_window > 0 ? wcc_window : length / 8;
}

double pair_statistic(std::span<const double> x, std::span<const double> y, const BaselineConfig& config) {
    switch (config.method) {
        case Method::pearson: return pearson_r(x, y);
        case Method::wcc: return wcc(x, y, config.resolved_window(x.size()), config.wcc_max_lag);
        case Method::dcor: return distance_correlation(x, y).value;
        case Method::hsic: return hsic_gaussian(x, y);
        case Method::mi: return mutual_information_binned(x, y, config.resolved_bins(x.size()));
        case Method::cmi: return conditional_mi_binned(x, y, config.resolved_bins(x.size()));
    }
    throw config_error("unknown method");
}

double combine_pair_statistics(const BaselineConfig& config, std::span<const double> per_pair) {
    if (per_pair.empty()) throw config_error("no pair statistics");
    const double m = mean_of(per_pair);
    return config.method == Method::pearson && config.two_sided ? std::abs(m) : m;
}

double shifted_dataset_statistic(const Dataset& dataset, const BaselineConfig& config,
                                 std::span<const std::size_t> shifts, std::size_t workers) {
    require_single_channel(dataset);
    if (shifts.size() != dataset.size()) throw config_error("one shift per pair required");
    std::vector<double> per_pair(dataset.size());
    parallel_for(dataset.size(), workers, [&](std::size_t i) {
        const auto& p = dataset.pairs[i];
        per_pair[i] = ShiftEvaluator(p.x, p.y, config).at(shifts[i]);
    });
    return combine_pair_statistics(config, per_pair);
}

TestResult baseline_test(const Dataset& dataset, const BaselineConfig& config, const Rng& rng, std::size_t workers) {
    require_single_channel(dataset);
    dataset.validate();
    const std::size_t n = dataset.size();
    const std::size_t len = dataset.length();
    config.validate(len);
    const std::size_t perms = config.n_permutations;

    // stats[k * n + i]: pair i under permutation k; row `perms` is the observed data.
    std::vector<double> stats((perms + 1) * n);
    if (config.scheme == NullScheme::circular_shift) {
        std::vector<std::size_t> shifts(perms * n);
        for (std::size_t k = 0; k < perms; ++k) {
            Rng r = rng.split(k);
            for (std::size_t i = 0; i < n; ++i) {
                shifts[k * n + i] = static_cast<std::size_t>(
                    r.range(static_cast<std::int64_t>(config.guard), static_cast<std::int64_t>(len - config.guard)));
            }
        }
        parallel_for(n, workers, [&](std::size_t i) {
            const auto& p = dataset.pairs[i];
            ShiftEvaluator ev(p.x, p.y, config);
            stats[perms * n + i] = ev.at(0);
            for (std::size_t k = 0; k < perms; ++k) stats[k * n + i] = ev.at(shifts[k * n + i]);
        });
    } else {
        if (n < 2) throw config_error("pair shuffling needs at least 2 pairs");
        std::vector<std::size_t> partner(perms * n);
        for (std::size_t k = 0; k < perms; ++k) {
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            Rng r = rng.split(k);
            r.shuffle(std::span<std::size_t>(order));
            std::copy(order.begin(), order.end(), partner.begin() + static_cast<std::ptrdiff_t>(k * n));
        }
        parallel_for(n, workers, [&](std::size_t i) {
            const auto& p = dataset.pairs[i];
            stats[perms * n + i] = ShiftEvaluator(p.x, p.y, config).at(0);
            for (std::size_t k = 0; k < perms; ++k) {
                stats[k * n + i] = pair_statistic(p.x, dataset.pairs[partner[k * n + i]].y, config);
            }
        });
    }

    TestResult result;
    result.n_permutations = perms;
    result.observed = combine_pair_statistics(config, std::span<const double>(stats).subspan(perms * n, n));
    std::vector<double> null(perms);
    for (std::size_t k = 0; k < perms; ++k) {
        null[k] = combine_pair_statistics(config, std::span<const double>(stats).subspan(k * n, n));
    }
    result.empirical_p = empirical_p(result.observed, null);
    result.p_value = result.empirical_p;
    return result;
}

}  // namespace concurrence
