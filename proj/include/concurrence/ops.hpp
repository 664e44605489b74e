#pragma once

#include <span>
#include <vector>

#include "concurrence/rng.hpp"
#include "concurrence/tensor.hpp"

namespace concurrence {

/// Valid (unpadded) strided 1-D convolution, cross-correlation convention.
///
/// `input` is Cin x L or N x Cin x L, `weight` is Cout x Cin x k, `bias` has
/// Cout entries. Output length is floor((L - k) / stride) + 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride);

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

struct BatchNormStats {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormStats(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Per-channel normalization of an N x C x L batch. Train mode normalizes by
/// the batch statistics over (N, L) and updates `stats` (running variance
/// uses the unbiased estimate); eval mode uses the running statistics.
Tensor batchnorm1d(const Tensor& batch, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                   Mode mode);

Tensor relu(const Tensor& input);

/// Inverted dropout. Identity in eval mode or at rate 0.
Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng);

/// Numerically stable binary cross entropy on a raw logit.
double bce_with_logits(double logit, int label);

/// Mean BCE over a vector of logits.
Tensor bce_with_logits(const Tensor& logits, std::span<const int> labels);

/// Time-centered cross-covariance per batch element:
/// N x Kf x L and N x Kg x L -> N x Kf x Kg, normalized by 1/L.
Tensor cross_covariance(const Tensor& f, const Tensor& g);

/// s[n] = sum_ij alpha[i, j] * c[n, i, j] for c of shape N x A x B.
Tensor weighted_sum(const Tensor& c, const Tensor& alpha);

Tensor sum(const Tensor& input);

}  // namespace concurrence
