#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace concurrence {

enum class KernelFamily { ricker, gauss_deriv, real_morlet, haar, raised_cosine };

struct KernelSpec {
    KernelFamily family = KernelFamily::ricker;
    int order = 1;         ///< derivative order for gauss_deriv (1..4)
    double scale = 4.0;    ///< width parameter in samples
    std::size_t support = 0;  ///< 0: derived from scale

    /// Support length actually used: max(minimum, round(8 * scale)) unless set.
    std::size_t support_length() const;
    bool zero_mean() const;
};

/// Closed-form kernel sampled on `support_length()` points centred on the
/// middle sample, L2-normalized. Zero-mean families are mean-corrected first.
std::vector<double> kernel_bank(const KernelSpec& spec);

/// "ricker", "gauss1".."gauss4", "morlet", "haar", "raised_cosine".
KernelSpec parse_kernel(const std::string& name, double scale);
std::string kernel_name(const KernelSpec& spec);

/// Families used when a generator picks wavelets at random.
const std::vector<std::string>& wavelet_names();

}  // namespace concurrence
