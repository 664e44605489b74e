#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "concurrence/ops.hpp"
#include "concurrence/rng.hpp"
#include "concurrence/tensor.hpp"

namespace concurrence {

/// Architecture of the two convolutional encoders. Block b (1-based) emits
/// first_channels / 2^(b-1) channels.
struct EncoderConfig {
    std::size_t blocks = 3;
    std::size_t first_channels = 512;
    std::size_t first_kernel = 5;
    std::size_t kernel = 3;
    std::size_t first_stride = 3;
    std::size_t stride = 2;
    double dropout = 0.25;

    void validate() const;
    std::size_t block_channels(std::size_t block) const;  // 0-based block index
    std::size_t block_kernel(std::size_t block) const { return block == 0 ? first_kernel : kernel; }
    std::size_t block_stride(std::size_t block) const { return block == 0 ? first_stride : stride; }
    std::size_t out_channels() const { return block_channels(blocks - 1); }
};

/// Temporal length after all encoder blocks. Throws naming the 1-based block
/// whose input is shorter than its kernel.
std::size_t output_length(std::size_t w, const EncoderConfig& config);

struct ConvBlock {
    Tensor bn_gamma;
    Tensor bn_beta;
    BatchNormStats bn;
    Tensor weight;  // Cout x Cin x k
    Tensor bias;
    std::size_t stride = 1;
};

/// batchnorm -> conv1d -> dropout -> relu, repeated per block.
struct Encoder {
    std::vector<ConvBlock> blocks;

    Tensor forward(const Tensor& batch, Mode mode, double dropout_rate, Rng& rng);
    Tensor forward_eval(const Tensor& batch) const;
};

/// A named view of one model buffer, used for serialization.
struct NamedBuffer {
    std::string name;
    Shape shape;
    std::span<double> values;
};

class ConcurrenceModel {
public:
    EncoderConfig config;
    std::size_t kx = 0;
    std::size_t ky = 0;
    std::size_t w = 0;
    std::size_t w_out = 0;
    Encoder f;
    Encoder g;
    Tensor alpha;  // Kf x Kg

    /// Per-segment concurrence scores for N x Kx x w and N x Ky x w batches.
    /// Train mode uses batch statistics and active dropout and updates the
    /// running statistics.
    Tensor scores(const Tensor& x_batch, const Tensor& y_batch, Mode mode, Rng& rng);

    /// Eval-mode scores without recording a graph. The batch is processed in
    /// fixed-size chunks, so results do not depend on how callers group
    /// segments.
    std::vector<double> score_eval(std::span<const double> x_batch, std::span<const double> y_batch,
                                   std::size_t count) const;

    /// Trainable tensors: per block gamma, beta, weight, bias for f then g, then alpha.
    std::vector<Tensor> parameters() const;

    /// Every persistent buffer, including running statistics, in a fixed order.
    std::vector<NamedBuffer> buffers();

    /// Deep copy (parameters are not shared with the source).
    ConcurrenceModel clone() const;
};

ConcurrenceModel build_model(const EncoderConfig& config, std::size_t kx, std::size_t ky, std::size_t w, Rng& rng);

/// Per-segment concurrence score of a single pair of Kx x w and Ky x w segments.
double pscs(ConcurrenceModel& model, std::span<const double> x_seg, std::span<const double> y_seg, Mode mode,
            Rng& rng);

}  // namespace concurrence
