#include "concurrence/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const std::string& what) {
    if (!cond) throw config_error(what);
}

// cols[(c * k + i), j] = x[c, j * stride + i]
void im2col(const double* x, std::size_t cin, std::size_t len, std::size_t k, std::size_t stride,
            std::size_t lout, double* cols) {
    for (std::size_t c = 0; c < cin; ++c) {
        const double* row = x + c * len;
        for (std::size_t i = 0; i < k; ++i) {
            double* dst = cols + (c * k + i) * lout;
            for (std::size_t j = 0; j < lout; ++j) dst[j] = row[j * stride + i];
        }
    }
}

void col2im_add(const double* cols, std::size_t cin, std::size_t len, std::size_t k, std::size_t stride,
                std::size_t lout, double* dx) {
    for (std::size_t c = 0; c < cin; ++c) {
        double* row = dx + c * len;
        for (std::size_t i = 0; i < k; ++i) {
            const double* src = cols + (c * k + i) * lout;
            for (std::size_t j = 0; j < lout; ++j) row[j * stride + i] += src[j];
        }
    }
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
    require(stride >= 1, "conv1d stride must be >= 1");
    require(kernel >= 1, "conv1d kernel size must be >= 1");
    if (length < kernel) throw config_error("segment too short for kernel");
    return (length - kernel) / stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride) {
    require(input.rank() == 2 || input.rank() == 3, "conv1d input must be Cin x L or N x Cin x L");
    require(weight.rank() == 3, "conv1d kernels must be Cout x Cin x k");
    const bool batched = input.rank() == 3;
    const std::size_t n = batched ? input.dim(0) : 1;
    const std::size_t cin = input.dim(batched ? 1 : 0);
    const std::size_t len = input.dim(batched ? 2 : 1);
    const std::size_t cout = weight.dim(0);
    const std::size_t k = weight.dim(2);
    require(weight.dim(1) == cin, "conv1d kernel input channels do not match input");
    require(bias.numel() == cout, "conv1d bias length must equal output channels");
    const std::size_t lout = conv_output_length(len, k, stride);
    const std::size_t depth = cin * k;

    Buffer out(n * cout * lout);
    {
        Buffer cols(depth * lout);
        ConstMapMat w(weight.data().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth));
        const double* b = bias.data().data();
        for (std::size_t s = 0; s < n; ++s) {
            im2col(input.data().data() + s * cin * len, cin, len, k, stride, lout, cols.data());
            ConstMapMat col(cols.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(lout));
            MapMat y(out.data() + s * cout * lout, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(lout));
            y.noalias() = w * col;
            for (std::size_t o = 0; o < cout; ++o) y.row(static_cast<Eigen::Index>(o)).array() += b[o];
        }
    }

    Shape shape = batched ? Shape{n, cout, lout} : Shape{cout, lout};
    return Tensor::from_op(std::move(shape), std::move(out), {input, weight, bias},
                           [n, cin, len, cout, k, stride, lout, depth](Tensor::Node& self) {
        auto& in = *self.parents[0];
        auto& wt = *self.parents[1];
        auto& bs = *self.parents[2];
        const double* dy_all = self.grad.data();
        ConstMapMat w(wt.data.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth));
        Buffer cols(depth * lout);
        Buffer dcols(depth * lout);
        for (std::size_t s = 0; s < n; ++s) {
            ConstMapMat dy(dy_all + s * cout * lout, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(lout));
            if (bs.requires_grad) {
                auto& db = bs.grad_buffer();
                for (std::size_t o = 0; o < cout; ++o) {
                    const double* row = dy_all + (s * cout + o) * lout;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < lout; ++j) acc += row[j];
                    db[o] += acc;
                }
            }
            if (wt.requires_grad) {
                im2col(in.data.data() + s * cin * len, cin, len, k, stride, lout, cols.data());
                ConstMapMat col(cols.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(lout));
                MapMat dw(wt.grad_buffer().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth));
                dw.noalias() += dy * col.transpose();
            }
            if (in.requires_grad) {
                MapMat dc(dcols.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(lout));
                dc.noalias() = w.transpose() * dy;
                col2im_add(dcols.data(), cin, len, k, stride, lout, in.grad_buffer().data() + s * cin * len);
            }
        }
    });
}

Tensor batchnorm1d(const Tensor& batch, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                   Mode mode) {
    require(batch.rank() == 3, "batchnorm1d expects an N x C x L batch");
    const std::size_t n = batch.dim(0);
    const std::size_t c = batch.dim(1);
    const std::size_t len = batch.dim(2);
    require(gamma.numel() == c && beta.numel() == c, "batchnorm1d affine parameters must have C entries");
    require(stats.running_mean.size() == c && stats.running_var.size() == c,
            "batchnorm1d running statistics must have C entries");
    const std::size_t count = n * len;
    if (count == 0) throw config_error("batchnorm1d on an empty batch");
    if (mode == Mode::train && count < 2) throw config_error("batchnorm1d train mode needs N*L >= 2 per channel");

    const double* x = batch.data().data();
    const double* gm = gamma.data().data();
    const double* bt = beta.data().data();
    auto means = std::make_shared<std::vector<double>>(c);
    auto inv_std = std::make_shared<std::vector<double>>(c);
    Buffer out(batch.numel());

    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        double var = 0.0;
        if (mode == Mode::train) {
            for (std::size_t s = 0; s < n; ++s) {
                const double* row = x + (s * c + ch) * len;
                for (std::size_t j = 0; j < len; ++j) mean += row[j];
            }
            mean /= static_cast<double>(count);
            for (std::size_t s = 0; s < n; ++s) {
                const double* row = x + (s * c + ch) * len;
                for (std::size_t j = 0; j < len; ++j) var += (row[j] - mean) * (row[j] - mean);
            }
            const double unbiased = var / static_cast<double>(count - 1);
            var /= static_cast<double>(count);
            stats.running_mean[ch] = (1.0 - stats.momentum) * stats.running_mean[ch] + stats.momentum * mean;
            stats.running_var[ch] = (1.0 - stats.momentum) * stats.running_var[ch] + stats.momentum * unbiased;
        } else {
            mean = stats.running_mean[ch];
            var = stats.running_var[ch];
        }
        const double is = 1.0 / std::sqrt(var + stats.eps);
        (*means)[ch] = mean;
        (*inv_std)[ch] = is;
        const double scale = gm[ch] * is;
        const double shift = bt[ch] - scale * mean;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * len;
            for (std::size_t j = 0; j < len; ++j) out[base + j] = scale * x[base + j] + shift;
        }
    }

    // xhat is recomputed from the input during the backward pass instead of
    // being stored alongside the output.
    return Tensor::from_op(batch.shape(), std::move(out), {batch, gamma, beta},
                           [n, c, len, count, mode, means, inv_std](Tensor::Node& self) {
        auto& in = *self.parents[0];
        auto& gm = *self.parents[1];
        auto& bt = *self.parents[2];
        const double* dy = self.grad.data();
        const double* x = in.data.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double mu = (*means)[ch];
            const double is = (*inv_std)[ch];
            double sum_dy = 0.0;
            double sum_dy_h = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t base = (s * c + ch) * len;
                for (std::size_t j = 0; j < len; ++j) {
                    sum_dy += dy[base + j];
                    sum_dy_h += dy[base + j] * (x[base + j] - mu) * is;
                }
            }
            if (gm.requires_grad) gm.grad_buffer()[ch] += sum_dy_h;
            if (bt.requires_grad) bt.grad_buffer()[ch] += sum_dy;
            if (!in.requires_grad) continue;
            const double g = gm.data[ch];
            auto& dx = in.grad_buffer();
            if (mode == Mode::train) {
                const double m = static_cast<double>(count);
                const double a = g * is;
                const double mean_dy = sum_dy / m;
                const double b = sum_dy_h / m * is;
                for (std::size_t s = 0; s < n; ++s) {
                    const std::size_t base = (s * c + ch) * len;
                    for (std::size_t j = 0; j < len; ++j) {
                        dx[base + j] += a * (dy[base + j] - mean_dy - (x[base + j] - mu) * b);
                    }
                }
            } else {
                for (std::size_t s = 0; s < n; ++s) {
                    const std::size_t base = (s * c + ch) * len;
                    for (std::size_t j = 0; j < len; ++j) dx[base + j] += g * is * dy[base + j];
                }
            }
        }
    });
}

Tensor relu(const Tensor& input) {
    const auto x = input.data();
    Buffer out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return Tensor::from_op(input.shape(), std::move(out), {input}, [](Tensor::Node& self) {
        auto& in = *self.parents[0];
        auto& dx = in.grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (in.data[i] > 0.0) dx[i] += self.grad[i];
        }
    });
}

Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw config_error("dropout rate must lie in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) return input;
    const double keep_scale = 1.0 / (1.0 - rate);
    const std::size_t count = input.numel();
    // One bit per element, set where the element is dropped.
    auto dropped = std::make_shared<std::vector<std::uint64_t>>((count + 63) / 64);
    for (auto& word : *dropped) word = rng.bernoulli_bits(rate);
    Buffer out(count);
    const double* x = input.data().data();
    for (std::size_t i = 0; i < count; ++i) {
        const bool drop = ((*dropped)[i >> 6] >> (i & 63)) & 1U;
        out[i] = drop ? 0.0 : x[i] * keep_scale;
    }
    return Tensor::from_op(input.shape(), std::move(out), {input}, [dropped, keep_scale](Tensor::Node& self) {
        auto& dx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const bool drop = ((*dropped)[i >> 6] >> (i & 63)) & 1U;
            if (!drop) dx[i] += self.grad[i] * keep_scale;
        }
    });
}

namespace {

double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

double bce_with_logits(double logit, int label) {
    if (label != 0 && label != 1) throw config_error("label must be 0 or 1");
    return label == 1 ? softplus(-logit) : softplus(logit);
}

Tensor bce_with_logits(const Tensor& logits, std::span<const int> labels) {
    require(logits.numel() == labels.size(), "bce_with_logits: one label per logit");
    require(!labels.empty(), "bce_with_logits on an empty batch");
    const double m = static_cast<double>(labels.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) loss += bce_with_logits(logits.data()[i], labels[i]);
    std::vector<int> y(labels.begin(), labels.end());
    return Tensor::from_op({1}, {loss / m}, {logits}, [y = std::move(y), m](Tensor::Node& self) {
        auto& in = *self.parents[0];
        auto& dz = in.grad_buffer();
        const double up = self.grad[0];
        for (std::size_t i = 0; i < y.size(); ++i) dz[i] += up * (sigmoid(in.data[i]) - y[i]) / m;
    });
}

Tensor cross_covariance(const Tensor& f, const Tensor& g) {
    require(f.rank() == 3 && g.rank() == 3, "cross_covariance expects N x K x L inputs");
    require(f.dim(0) == g.dim(0) && f.dim(2) == g.dim(2), "cross_covariance batch/time extents differ");
    const std::size_t n = f.dim(0);
    const std::size_t kf = f.dim(1);
    const std::size_t kg = g.dim(1);
    const std::size_t len = f.dim(2);
    const auto ef = static_cast<Eigen::Index>(kf);
    const auto eg = static_cast<Eigen::Index>(kg);
    const auto el = static_cast<Eigen::Index>(len);
    const double inv_len = 1.0 / static_cast<double>(len);

    auto centered = [len](std::span<const double> src) {
        auto out = std::make_shared<Buffer>(src.begin(), src.end());
        for (std::size_t r = 0; r < out->size() / len; ++r) {
            double* row = out->data() + r * len;
            double mean = 0.0;
            for (std::size_t j = 0; j < len; ++j) mean += row[j];
            mean /= static_cast<double>(len);
            for (std::size_t j = 0; j < len; ++j) row[j] -= mean;
        }
        return out;
    };
    auto fc = centered(f.data());
    auto gc = centered(g.data());

    Buffer out(n * kf * kg);
    for (std::size_t s = 0; s < n; ++s) {
        ConstMapMat a(fc->data() + s * kf * len, ef, el);
        ConstMapMat b(gc->data() + s * kg * len, eg, el);
        MapMat cm(out.data() + s * kf * kg, ef, eg);
        cm.noalias() = a * b.transpose();
        cm *= inv_len;
    }

    return Tensor::from_op({n, kf, kg}, std::move(out), {f, g},
                           [n, kf, kg, len, ef, eg, el, inv_len, fc, gc](Tensor::Node& self) {
        auto& fn = *self.parents[0];
        auto& gn = *self.parents[1];
        RowMat tmp;
        auto center_add = [len](const RowMat& m, double* dst) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                double mean = 0.0;
                for (std::size_t j = 0; j < len; ++j) mean += m(r, static_cast<Eigen::Index>(j));
                mean /= static_cast<double>(len);
                for (std::size_t j = 0; j < len; ++j) dst[r * static_cast<Eigen::Index>(len) + static_cast<Eigen::Index>(j)] += m(r, static_cast<Eigen::Index>(j)) - mean;
            }
        };
        for (std::size_t s = 0; s < n; ++s) {
            ConstMapMat dc(self.grad.data() + s * kf * kg, ef, eg);
            ConstMapMat a(fc->data() + s * kf * len, ef, el);
            ConstMapMat b(gc->data() + s * kg * len, eg, el);
            if (fn.requires_grad) {
                tmp.noalias() = dc * b;
                tmp *= inv_len;
                center_add(tmp, fn.grad_buffer().data() + s * kf * len);
            }
            if (gn.requires_grad) {
                tmp.noalias() = dc.transpose() * a;
                tmp *= inv_len;
                center_add(tmp, gn.grad_buffer().data() + s * kg * len);
            }
        }
    });
}

Tensor weighted_sum(const Tensor& c, const Tensor& alpha) {
    require(c.rank() == 3 && alpha.rank() == 2, "weighted_sum expects N x A x B and A x B");
    require(c.dim(1) == alpha.dim(0) && c.dim(2) == alpha.dim(1), "weighted_sum shape mismatch");
    const std::size_t n = c.dim(0);
    const std::size_t m = alpha.numel();
    Buffer out(n, 0.0);
    const double* cd = c.data().data();
    const double* ad = alpha.data().data();
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += ad[i] * cd[s * m + i];
        out[s] = acc;
    }
    return Tensor::from_op({n}, std::move(out), {c, alpha}, [n, m](Tensor::Node& self) {
        auto& cn = *self.parents[0];
        auto& an = *self.parents[1];
        for (std::size_t s = 0; s < n; ++s) {
            const double up = self.grad[s];
            if (cn.requires_grad) {
                auto& dc = cn.grad_buffer();
                for (std::size_t i = 0; i < m; ++i) dc[s * m + i] += up * an.data[i];
            }
            if (an.requires_grad) {
                auto& da = an.grad_buffer();
                for (std::size_t i = 0; i < m; ++i) da[i] += up * cn.data[s * m + i];
            }
        }
    });
}

Tensor sum(const Tensor& input) {
    double acc = 0.0;
    for (double v : input.data()) acc += v;
    return Tensor::from_op({1}, {acc}, {input}, [](Tensor::Node& self) {
        auto& dx = self.parents[0]->grad_buffer();
        for (auto& v : dx) v += self.grad[0];
    });
}

}  // namespace concurrence
