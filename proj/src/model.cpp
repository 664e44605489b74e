#include "concurrence/model.hpp"

#include <algorithm>
#include <cmath>

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

constexpr std::size_t kEvalChunk = 32;

Tensor init_uniform(Shape shape, double bound, Rng& rng) {
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(values), true);
}

Encoder build_encoder(const EncoderConfig& config, std::size_t in_channels, Rng& rng) {
    Encoder enc;
    std::size_t cin = in_channels;
    for (std::size_t b = 0; b < config.blocks; ++b) {
        const std::size_t cout = config.block_channels(b);
        const std::size_t k = config.block_kernel(b);
        ConvBlock block;
        block.bn_gamma = Tensor::full({cin}, 1.0, true);
        block.bn_beta = Tensor::zeros({cin}, true);
        block.bn = BatchNormStats(cin);
        block.weight = init_uniform({cout, cin, k}, 1.0 / std::sqrt(static_cast<double>(cin * k)), rng);
        block.bias = Tensor::zeros({cout}, true);
        block.stride = config.block_stride(b);
        enc.blocks.push_back(std::move(block));
        cin = cout;
    }
    return enc;
}

Tensor clone_tensor(const Tensor& t) { return Tensor(t.shape(), Buffer(t.data().begin(), t.data().end()), t.requires_grad()); }

}  // namespace

void EncoderConfig::validate() const {
    if (blocks < 1) throw config_error("encoder needs at least one block");
    if (first_channels < 1) throw config_error("first_channels must be >= 1");
    if (first_kernel < 1 || kernel < 1) throw config_error("kernel sizes must be >= 1");
    if (first_stride < 1 || stride < 1) throw config_error("strides must be >= 1");
    if (blocks > 63 || first_channels % (std::size_t{1} << (blocks - 1)) != 0) {
        throw config_error("first_channels must be divisible by 2^(blocks-1)");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("dropout rate must lie in [0, 1)");
}

std::size_t EncoderConfig::block_channels(std::size_t block) const { return first_channels >> block; }

std::size_t output_length(std::size_t w, const EncoderConfig& config) {
    config.validate();
    std::size_t len = w;
    for (std::size_t b = 0; b < config.blocks; ++b) {
        const std::size_t k = config.block_kernel(b);
        if (len < k) {
            throw config_error("segment too short: block " + std::to_string(b + 1) + " receives length " +
                               std::to_string(len) + " < kernel " + std::to_string(k));
        }
        len = (len - k) / config.block_stride(b) + 1;
    }
    return len;
}

Tensor Encoder::forward(const Tensor& batch, Mode mode, double dropout_rate, Rng& rng) {
    Tensor h = batch;
    for (auto& block : blocks) {
        h = batchnorm1d(h, block.bn_gamma, block.bn_beta, block.bn, mode);
        h = conv1d(h, block.weight, block.bias, block.stride);
        h = dropout(h, dropout_rate, mode, rng);
        h = relu(h);
    }
    return h;
}

Tensor Encoder::forward_eval(const Tensor& batch) const {
    Tensor h = batch;
    for (const auto& block : blocks) {
        BatchNormStats stats = block.bn;  // eval mode reads only
        h = batchnorm1d(h, block.bn_gamma, block.bn_beta, stats, Mode::eval);
        h = conv1d(h, block.weight, block.bias, block.stride);
        h = relu(h);
    }
    return h;
}

ConcurrenceModel build_model(const EncoderConfig& config, std::size_t kx, std::size_t ky, std::size_t w, Rng& rng) {
    if (kx == 0 || ky == 0) throw config_error("signals need at least one channel");
    ConcurrenceModel model;
    model.config = config;
    model.kx = kx;
    model.ky = ky;
    model.w = w;
    model.w_out = output_length(w, config);
    Rng f_rng = rng.split(0);
    Rng g_rng = rng.split(1);
    Rng a_rng = rng.split(2);
    model.f = build_encoder(config, kx, f_rng);
    model.g = build_encoder(config, ky, g_rng);
    const std::size_t k = config.out_channels();
    std::vector<double> alpha(k * k);
    const double sd = 1.0 / static_cast<double>(k);  // 1 / sqrt(Kf * Kg) with Kf == Kg
    for (auto& a : alpha) a = sd * a_rng.normal();
    model.alpha = Tensor({k, k}, std::move(alpha), true);
    return model;
}

Tensor ConcurrenceModel::scores(const Tensor& x_batch, const Tensor& y_batch, Mode mode, Rng& rng) {
    if (x_batch.rank() != 3 || y_batch.rank() != 3 || x_batch.dim(1) != kx || y_batch.dim(1) != ky ||
        x_batch.dim(2) != w || y_batch.dim(2) != w || x_batch.dim(0) != y_batch.dim(0)) {
        throw config_error("segment batch shapes do not match the model (Kx, Ky, w)");
    }
    Tensor fx = f.forward(x_batch, mode, config.dropout, rng);
    Tensor gy = g.forward(y_batch, mode, config.dropout, rng);
    return weighted_sum(cross_covariance(fx, gy), alpha);
}

std::vector<double> ConcurrenceModel::score_eval(std::span<const double> x_batch, std::span<const double> y_batch,
                                                 std::size_t count) const {
    if (x_batch.size() != count * kx * w || y_batch.size() != count * ky * w) {
        throw config_error("segment batch shapes do not match the model (Kx, Ky, w)");
    }
    NoGradGuard no_grad;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t start = 0; start < count; start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, count - start);
        Tensor xb({n, kx, w}, Buffer(x_batch.begin() + static_cast<std::ptrdiff_t>(start * kx * w),
                                     x_batch.begin() + static_cast<std::ptrdiff_t>((start + n) * kx * w)));
        Tensor yb({n, ky, w}, Buffer(y_batch.begin() + static_cast<std::ptrdiff_t>(start * ky * w),
                                     y_batch.begin() + static_cast<std::ptrdiff_t>((start + n) * ky * w)));
        Tensor s = weighted_sum(cross_covariance(f.forward_eval(xb), g.forward_eval(yb)), alpha);
        out.insert(out.end(), s.data().begin(), s.data().end());
    }
    return out;
}

std::vector<Tensor> ConcurrenceModel::parameters() const {
    std::vector<Tensor> params;
    for (const Encoder* enc : {&f, &g}) {
        for (const auto& b : enc->blocks) {
            params.push_back(b.bn_gamma);
            params.push_back(b.bn_beta);
            params.push_back(b.weight);
            params.push_back(b.bias);
        }
    }
    params.push_back(alpha);
    return params;
}

std::vector<NamedBuffer> ConcurrenceModel::buffers() {
    std::vector<NamedBuffer> out;
    auto add_encoder = [&out](Encoder& enc, const std::string& prefix) {
        for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
            auto& b = enc.blocks[i];
            const std::string p = prefix + ".block" + std::to_string(i) + ".";
            const std::size_t c = b.bn.running_mean.size();
            out.push_back({p + "bn.gamma", b.bn_gamma.shape(), b.bn_gamma.data()});
            out.push_back({p + "bn.beta", b.bn_beta.shape(), b.bn_beta.data()});
            out.push_back({p + "bn.running_mean", {c}, b.bn.running_mean});
            out.push_back({p + "bn.running_var", {c}, b.bn.running_var});
            out.push_back({p + "conv.weight", b.weight.shape(), b.weight.data()});
            out.push_back({p + "conv.bias", b.bias.shape(), b.bias.data()});
        }
    };
    add_encoder(f, "f");
    add_encoder(g, "g");
    out.push_back({"alpha", alpha.shape(), alpha.data()});
    return out;
}

ConcurrenceModel ConcurrenceModel::clone() const {
    ConcurrenceModel copy = *this;
    for (Encoder* enc : {&copy.f, &copy.g}) {
        for (auto& b : enc->blocks) {
            b.bn_gamma = clone_tensor(b.bn_gamma);
            b.bn_beta = clone_tensor(b.bn_beta);
            b.weight = clone_tensor(b.weight);
            b.bias = clone_tensor(b.bias);
        }
    }
    copy.alpha = clone_tensor(alpha);
    return copy;
}

double pscs(ConcurrenceModel& model, std::span<const double> x_seg, std::span<const double> y_seg, Mode mode,
            Rng& rng) {
    if (x_seg.size() != model.kx * model.w || y_seg.size() != model.ky * model.w) {
        throw config_error("segment shapes do not match the model (Kx x w, Ky x w)");
    }
    if (mode == Mode::eval) return model.score_eval(x_seg, y_seg, 1).front();
    Tensor xb({1, model.kx, model.w}, Buffer(x_seg.begin(), x_seg.end()));
    Tensor yb({1, model.ky, model.w}, Buffer(y_seg.begin(), y_seg.end()));
    return model.scores(xb, yb, mode, rng).item();
}

}  // namespace concurrence
