#include "concurrence/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

// Probabilists' Hermite polynomials; d^n/du^n exp(-u^2/2) = (-1)^n He_n(u) exp(-u^2/2).
double hermite(int n, double u) {
    switch (n) {
        case 1: return u;
        case 2: return u * u - 1.0;
        case 3: return u * u * u - 3.0 * u;
        case 4: return u * u * u * u - 6.0 * u * u + 3.0;
        default: throw config_error("gauss_deriv order must be 1..4");
    }
}

}  // namespace

std::size_t KernelSpec::support_length() const {
    if (support > 0) return support;
    const std::size_t minimum = family == KernelFamily::haar ? 2 : 3;
    return std::max(minimum, static_cast<std::size_t>(std::llround(8.0 * scale)));
}

bool KernelSpec::zero_mean() const {
    return family == KernelFamily::ricker || family == KernelFamily::gauss_deriv || family == KernelFamily::haar;
}

std::vector<double> kernel_bank(const KernelSpec& spec) {
    if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) throw config_error("kernel scale must be positive");
    const std::size_t len = spec.support_length();
    std::vector<double> k(len);
    const double centre = 0.5 * static_cast<double>(len - 1);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) - centre;
        const double u = t / spec.scale;
        const double env = std::exp(-0.5 * u * u);
        switch (spec.family) {
            case KernelFamily::ricker:
                k[i] = (1.0 - u * u) * env;
                break;
            case KernelFamily::gauss_deriv:
                k[i] = (spec.order % 2 == 0 ? 1.0 : -1.0) * hermite(spec.order, u) * env;
                break;
            case KernelFamily::real_morlet:
                k[i] = std::cos(5.0 * u) * env;
                break;
            case KernelFamily::haar:
                // odd lengths leave the middle sample at zero
                k[i] = t < 0.0 ? 1.0 : (t > 0.0 ? -1.0 : 0.0);
                break;
            case KernelFamily::raised_cosine:
                k[i] = std::abs(u) <= 4.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * u / 4.0)) : 0.0;
                break;
        }
    }
    if (spec.zero_mean()) {
        double mean = 0.0;
        for (double v : k) mean += v;
        mean /= static_cast<double>(len);
        for (double& v : k) v -= mean;
    }
    double norm = 0.0;
    for (double v : k) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw numeric_error("kernel has zero norm at this scale/support");
    for (double& v : k) v /= norm;
    return k;
}

KernelSpec parse_kernel(const std::string& name, double scale) {
    KernelSpec spec;
    spec.scale = scale;
    if (name == "ricker") {
        spec.family = KernelFamily::ricker;
    } else if (name.size() == 6 && name.rfind("gauss", 0) == 0 && name[5] >= '1' && name[5] <= '4') {
        spec.family = KernelFamily::gauss_deriv;
        spec.order = name[5] - '0';
    } else if (name == "morlet") {
        spec.family = KernelFamily::real_morlet;
    } else if (name == "haar") {
        spec.family = KernelFamily::haar;
    } else if (name == "raised_cosine") {
        spec.family = KernelFamily::raised_cosine;
    } else {
        throw config_error("unknown kernel family '" + name + "'");
    }
    return spec;
}

std::string kernel_name(const KernelSpec& spec) {
    switch (spec.family) {
        case KernelFamily::ricker: return "ricker";
        case KernelFamily::gauss_deriv: return "gauss" + std::to_string(spec.order);
        case KernelFamily::real_morlet: return "morlet";
        case KernelFamily::haar: return "haar";
        case KernelFamily::raised_cosine: return "raised_cosine";
    }
    return "unknown";
}

const std::vector<std::string>& wavelet_names() {
    static const std::vector<std::string> names{"ricker", "gauss1", "gauss2", "gauss3", "gauss4", "morlet", "haar"};
    return names;
}

}  // namespace concurrence
