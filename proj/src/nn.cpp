#include "specmix/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "specmix/common.hpp"
#include "specmix/config_io.hpp"
#include "specmix/eval.hpp"

namespace specmix::nn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

void NetworkConfig::validate() const {
    if (input_length < 1) throw ConfigError("input_length must be >= 1");
    if (kernel_width < 1) throw ConfigError("kernel_width must be >= 1");
    if (initial_filters < 1) throw ConfigError("initial_filters must be >= 1");
    if (n_res_blocks < 0) throw ConfigError("n_res_blocks must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout_rate must be in [0, 1)");
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
    for (int b : subsample_blocks)
        if (b < 1 || b > n_res_blocks)
            throw ConfigError("subsample block index " + std::to_string(b) + " out of range");
    for (int b : filter_double_blocks)
        if (b < 1 || b > n_res_blocks)
            throw ConfigError("filter-double block index " + std::to_string(b) + " out of range");
    // every subsampling stage must leave at least one sample
    if (block_out_length(n_res_blocks) < 1)
        throw ConfigError("network subsamples the input away entirely");
}

int NetworkConfig::block_out_channels(int block) const {
    int c = initial_filters;
    for (int b = 1; b <= block; ++b)
        if (widens(b)) c *= 2;
    return c;
}

int NetworkConfig::block_in_channels(int block) const {
    return block_out_channels(block - 1);
}

int NetworkConfig::block_out_length(int block) const {
    int64_t len = input_length;   // stem conv has stride 1
    for (int b = 1; b <= block; ++b)
        if (subsamples(b)) len = conv_out_length(len, 2);
    return static_cast<int>(len);
}

namespace {

struct BlockPlan {
    int in_ch = 0, out_ch = 0;
    int conv1_stride = 1;
    bool pool_main = false;       // subsample without widening: pool both branches
    bool pool_shortcut = false;
    bool pad_channels = false;
};

BlockPlan plan_block(const NetworkConfig& cfg, int block) {
    const bool sub = cfg.subsamples(block);
    const bool wide = cfg.widens(block);
    BlockPlan p;
    p.in_ch = cfg.block_in_channels(block);
    p.out_ch = cfg.block_out_channels(block);
    p.conv1_stride = (sub && wide) ? 2 : 1;
    p.pool_main = sub && !wide;
    p.pool_shortcut = sub;
    p.pad_channels = wide;
    return p;
}

std::string block_prefix(int block) { return "block" + std::to_string(block) + "."; }

void check_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3)
        throw ShapeError(std::string(what) + " must be rank 3, got " + t.shape_str());
}

} // namespace

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

int conv_pad_left(int kernel_width) { return (kernel_width - 1) / 2; }

int64_t conv_out_length(int64_t in_length, int stride) {
    return (in_length + stride - 1) / stride;
}

Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, int stride) {
    check_rank3(input, "conv input");
    check_rank3(kernel, "conv kernel");
    if (stride < 1) throw std::invalid_argument("conv stride must be >= 1");
    if (kernel.shape[1] != input.shape[2])
        throw ShapeError("conv kernel expects " + std::to_string(kernel.shape[1]) +
                         " input channels, input has " + std::to_string(input.shape[2]));
    const int64_t B = input.shape[0], L = input.shape[1], Cin = input.shape[2];
    const int64_t K = kernel.shape[0], Cout = kernel.shape[2];
    const int64_t Lout = conv_out_length(L, stride);
    const int64_t pad_left = conv_pad_left(static_cast<int>(K));
    Tensor out = Tensor::zeros({B, Lout, Cout});

    for (int64_t b = 0; b < B; ++b) {
        const double* in_base = input.data.data() + b * L * Cin;
        double* out_base = out.data.data() + b * Lout * Cout;
        for (int64_t k = 0; k < K; ++k) {
            const int64_t shift = k - pad_left;   // src = t*stride + shift
            if (shift > L - 1) continue;
            const int64_t t_lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
            const int64_t t_hi = std::min<int64_t>(Lout - 1, (L - 1 - shift) / stride);
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* w = kernel.data.data() + (k * Cin + ci) * Cout;
                for (int64_t t = t_lo; t <= t_hi; ++t) {
                    const double x = in_base[(t * stride + shift) * Cin + ci];
                    double* o = out_base + t * Cout;
                    for (int64_t co = 0; co < Cout; ++co) o[co] += x * w[co];
                }
            }
        }
    }
    return out;
}

void conv1d_backward(const Tensor& input, const Tensor& kernel, int stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel) {
    check_rank3(input, "conv input");
    check_rank3(kernel, "conv kernel");
    check_rank3(grad_out, "conv output gradient");
    const int64_t B = input.shape[0], L = input.shape[1], Cin = input.shape[2];
    const int64_t K = kernel.shape[0], Cout = kernel.shape[2];
    const int64_t Lout = conv_out_length(L, stride);
    if (grad_out.shape != std::vector<int64_t>{B, Lout, Cout})
        throw ShapeError("conv output gradient has shape " + grad_out.shape_str() +
                         ", expected [" + std::to_string(B) + "," + std::to_string(Lout) + "," +
                         std::to_string(Cout) + "]");
    const int64_t pad_left = conv_pad_left(static_cast<int>(K));
    if (grad_input) *grad_input = Tensor::zeros(input.shape);
    if (grad_kernel) *grad_kernel = Tensor::zeros(kernel.shape);

    // kernel transposed to [K][Cout][Cin] so grad-input accumulation walks
    // contiguous channel rows
    std::vector<double> wt;
    if (grad_input) {
        wt.resize(static_cast<size_t>(K * Cout * Cin));
        for (int64_t k = 0; k < K; ++k)
            for (int64_t ci = 0; ci < Cin; ++ci)
                for (int64_t co = 0; co < Cout; ++co)
                    wt[(k * Cout + co) * Cin + ci] = kernel.data[(k * Cin + ci) * Cout + co];
    }

    for (int64_t b = 0; b < B; ++b) {
        const double* in_base = input.data.data() + b * L * Cin;
        const double* go_base = grad_out.data.data() + b * Lout * Cout;
        double* gi_base = grad_input ? grad_input->data.data() + b * L * Cin : nullptr;
        for (int64_t k = 0; k < K; ++k) {
            const int64_t shift = k - pad_left;
            if (shift > L - 1) continue;
            const int64_t t_lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
            const int64_t t_hi = std::min<int64_t>(Lout - 1, (L - 1 - shift) / stride);
            if (gi_base) {
                const double* wk = wt.data() + k * Cout * Cin;
                for (int64_t t = t_lo; t <= t_hi; ++t) {
                    const double* go = go_base + t * Cout;
                    double* gi = gi_base + (t * stride + shift) * Cin;
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double g = go[co];
                        const double* w = wk + co * Cin;
                        for (int64_t ci = 0; ci < Cin; ++ci) gi[ci] += g * w[ci];
                    }
                }
            }
            if (grad_kernel) {
                for (int64_t ci = 0; ci < Cin; ++ci) {
                    double* gk = grad_kernel->data.data() + (k * Cin + ci) * Cout;
                    for (int64_t t = t_lo; t <= t_hi; ++t) {
                        const double x = in_base[(t * stride + shift) * Cin + ci];
                        const double* go = go_base + t * Cout;
                        for (int64_t co = 0; co < Cout; ++co) gk[co] += x * go[co];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// batch norm
// ---------------------------------------------------------------------------

namespace {

void check_bn_params(const Tensor& input, const Tensor& gamma, const Tensor& beta) {
    check_rank3(input, "batchnorm input");
    const int64_t C = input.shape[2];
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batchnorm expects " + std::to_string(C) + "-channel scale/shift");
}

} // namespace

Tensor batchnorm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       Tensor& running_mean, Tensor& running_var, double eps, double momentum,
                       bool update_running, BatchNormCache* cache) {
    check_bn_params(input, gamma, beta);
    const int64_t B = input.shape[0], L = input.shape[1], C = input.shape[2];
    const int64_t N = B * L;
    if (running_mean.size() != C || running_var.size() != C)
        throw ShapeError("batchnorm running statistics have the wrong size");

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    const double* in = input.data.data();
    for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) mean[c] += in[i * C + c];
    for (int64_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(N);
    for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) {
            const double d = in[i * C + c] - mean[c];
            var[c] += d * d;
        }
    for (int64_t c = 0; c < C; ++c) var[c] /= static_cast<double>(N);

    Tensor out = Tensor::zeros(input.shape);
    std::vector<double> inv_std(C);
    for (int64_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    Tensor xhat = Tensor::zeros(input.shape);
    double* xh = xhat.data.data();
    double* o = out.data.data();
    for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) {
            const double h = (in[i * C + c] - mean[c]) * inv_std[c];
            xh[i * C + c] = h;
            o[i * C + c] = gamma.data[c] * h + beta.data[c];
        }

    if (update_running) {
        for (int64_t c = 0; c < C; ++c) {
            running_mean.data[c] = momentum * running_mean.data[c] + (1.0 - momentum) * mean[c];
            running_var.data[c] = momentum * running_var.data[c] + (1.0 - momentum) * var[c];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Tensor batchnorm_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                      const Tensor& running_mean, const Tensor& running_var, double eps) {
    check_bn_params(input, gamma, beta);
    const int64_t C = input.shape[2];
    if (running_mean.size() != C || running_var.size() != C)
        throw ShapeError("batchnorm running statistics have the wrong size");
    std::vector<double> scale(C), shift(C);
    for (int64_t c = 0; c < C; ++c) {
        scale[c] = gamma.data[c] / std::sqrt(running_var.data[c] + eps);
        shift[c] = beta.data[c] - scale[c] * running_mean.data[c];
    }
    Tensor out = Tensor::zeros(input.shape);
    const int64_t N = input.shape[0] * input.shape[1];
    for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c)
            out.data[i * C + c] = scale[c] * input.data[i * C + c] + shift[c];
    return out;
}

void batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                        Tensor* grad_input, Tensor* grad_gamma, Tensor* grad_beta) {
    check_rank3(grad_out, "batchnorm output gradient");
    if (!cache.xhat.same_shape(grad_out))
        throw ShapeError("batchnorm cache shape " + cache.xhat.shape_str() +
                         " does not match gradient shape " + grad_out.shape_str());
    const int64_t C = grad_out.shape[2];
    const int64_t N = grad_out.shape[0] * grad_out.shape[1];
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    const double* go = grad_out.data.data();
    const double* xh = cache.xhat.data.data();
    for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) {
            sum_g[c] += go[i * C + c];
            sum_gx[c] += go[i * C + c] * xh[i * C + c];
        }
    if (grad_gamma) {
        *grad_gamma = Tensor::zeros({C});
        std::copy(sum_gx.begin(), sum_gx.end(), grad_gamma->data.begin());
    }
    if (grad_beta) {
        *grad_beta = Tensor::zeros({C});
        std::copy(sum_g.begin(), sum_g.end(), grad_beta->data.begin());
    }
    if (grad_input) {
        *grad_input = Tensor::zeros(grad_out.shape);
        double* gi = grad_input->data.data();
        const double n = static_cast<double>(N);
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c) {
                const double scale = gamma.data[c] * cache.inv_std[c] / n;
                gi[i * C + c] =
                    scale * (n * go[i * C + c] - sum_g[c] - xh[i * C + c] * sum_gx[c]);
            }
    }
}

// ---------------------------------------------------------------------------
// pointwise / pooling / head
// ---------------------------------------------------------------------------

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
    if (!output.same_shape(grad_out))
        throw ShapeError("relu gradient shape mismatch: " + output.shape_str() + " vs " +
                         grad_out.shape_str());
    Tensor gi = grad_out;
    for (size_t i = 0; i < gi.data.size(); ++i)
        if (output.data[i] <= 0.0) gi.data[i] = 0.0;
    return gi;
}

Tensor dropout_forward(const Tensor& input, double rate, Rng& rng, std::vector<uint8_t>* mask) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
    if (rate == 0.0) {
        if (mask) mask->clear();
        return input;
    }
    if (!mask) throw std::invalid_argument("dropout requires a mask output in train mode");
    const double keep_scale = 1.0 / (1.0 - rate);
    mask->assign(input.data.size(), 0);
    Tensor out = input;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        (*mask)[i] = keep ? 1 : 0;
        out.data[i] = keep ? out.data[i] * keep_scale : 0.0;
    }
    return out;
}

Tensor dropout_backward(const Tensor& grad_out, const std::vector<uint8_t>& mask, double rate) {
    if (mask.size() != grad_out.data.size())
        throw ShapeError("dropout mask size does not match gradient");
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor gi = grad_out;
    for (size_t i = 0; i < gi.data.size(); ++i) gi.data[i] = mask[i] ? gi.data[i] * keep_scale : 0.0;
    return gi;
}

Tensor maxpool2_forward(const Tensor& input, std::vector<int32_t>* argmax) {
    check_rank3(input, "maxpool input");
    const int64_t B = input.shape[0], L = input.shape[1], C = input.shape[2];
    const int64_t Lout = (L + 1) / 2;
    Tensor out = Tensor::zeros({B, Lout, C});
    if (argmax) argmax->assign(static_cast<size_t>(B * Lout * C), 0);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < Lout; ++t) {
            const int64_t i0 = 2 * t, i1 = 2 * t + 1;
            for (int64_t c = 0; c < C; ++c) {
                const double a = input.at3(b, i0, c);
                if (i1 < L) {
                    const double v = input.at3(b, i1, c);
                    const bool second = v > a;   // tie -> earlier index
                    out.at3(b, t, c) = second ? v : a;
                    if (argmax) (*argmax)[(b * Lout + t) * C + c] = second ? 1 : 0;
                } else {
                    out.at3(b, t, c) = a;
                }
            }
        }
    return out;
}

Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<int32_t>& argmax,
                         int64_t in_length) {
    check_rank3(grad_out, "maxpool output gradient");
    const int64_t B = grad_out.shape[0], Lout = grad_out.shape[1], C = grad_out.shape[2];
    if (Lout != (in_length + 1) / 2)
        throw ShapeError("maxpool gradient length does not match input length");
    if (argmax.size() != grad_out.data.size())
        throw ShapeError("maxpool argmax size does not match gradient");
    Tensor gi = Tensor::zeros({B, in_length, C});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < Lout; ++t)
            for (int64_t c = 0; c < C; ++c) {
                const int64_t src = 2 * t + argmax[(b * Lout + t) * C + c];
                gi.at3(b, src, c) += grad_out.at3(b, t, c);
            }
    return gi;
}

Tensor gap_forward(const Tensor& input) {
    check_rank3(input, "pooling input");
    const int64_t B = input.shape[0], L = input.shape[1], C = input.shape[2];
    Tensor out = Tensor::zeros({B, C});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < L; ++t)
            for (int64_t c = 0; c < C; ++c) out.at2(b, c) += input.at3(b, t, c);
    for (double& x : out.data) x /= static_cast<double>(L);
    return out;
}

Tensor gap_backward(const Tensor& grad_out, int64_t length) {
    if (grad_out.rank() != 2) throw ShapeError("pooling gradient must be rank 2");
    const int64_t B = grad_out.shape[0], C = grad_out.shape[1];
    Tensor gi = Tensor::zeros({B, length, C});
    const double inv = 1.0 / static_cast<double>(length);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < length; ++t)
            for (int64_t c = 0; c < C; ++c) gi.at3(b, t, c) = grad_out.at2(b, c) * inv;
    return gi;
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
        throw ShapeError("dense expects rank-2 input/weight and rank-1 bias");
    const int64_t B = input.shape[0], C = input.shape[1], Nc = weight.shape[1];
    if (weight.shape[0] != C || bias.shape[0] != Nc)
        throw ShapeError("dense weight " + weight.shape_str() + " does not match input " +
                         input.shape_str());
    Tensor out = Tensor::zeros({B, Nc});
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t n = 0; n < Nc; ++n) out.at2(b, n) = bias.data[n];
        for (int64_t c = 0; c < C; ++c) {
            const double x = input.at2(b, c);
            for (int64_t n = 0; n < Nc; ++n) out.at2(b, n) += x * weight.at2(c, n);
        }
    }
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                    Tensor* grad_input, Tensor* grad_weight, Tensor* grad_bias) {
    const int64_t B = input.shape[0], C = input.shape[1], Nc = weight.shape[1];
    if (grad_out.shape != std::vector<int64_t>{B, Nc})
        throw ShapeError("dense output gradient has the wrong shape");
    if (grad_input) *grad_input = Tensor::zeros(input.shape);
    if (grad_weight) *grad_weight = Tensor::zeros(weight.shape);
    if (grad_bias) *grad_bias = Tensor::zeros({Nc});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t n = 0; n < Nc; ++n) {
            const double g = grad_out.at2(b, n);
            if (grad_bias) grad_bias->data[n] += g;
            for (int64_t c = 0; c < C; ++c) {
                if (grad_input) grad_input->at2(b, c) += g * weight.at2(c, n);
                if (grad_weight) grad_weight->at2(c, n) += g * input.at2(b, c);
            }
        }
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax expects rank-2 logits");
    const int64_t B = logits.shape[0], C = logits.shape[1];
    Tensor out = logits;
    for (int64_t b = 0; b < B; ++b) {
        double m = out.at2(b, 0);
        for (int64_t c = 1; c < C; ++c) m = std::max(m, out.at2(b, c));
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            const double e = std::exp(out.at2(b, c) - m);
            out.at2(b, c) = e;
            z += e;
        }
        for (int64_t c = 0; c < C; ++c) out.at2(b, c) /= z;
    }
    return out;
}

namespace {

void check_labels(const Tensor& rows, const std::vector<int>& labels) {
    if (static_cast<int64_t>(labels.size()) != rows.shape[0])
        throw std::invalid_argument("label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= rows.shape[1])
            throw std::invalid_argument("class label " + std::to_string(y) + " out of range");
}

} // namespace

double cross_entropy_loss(const Tensor& probabilities, const std::vector<int>& labels) {
    if (probabilities.rank() != 2) throw ShapeError("cross entropy expects rank-2 probabilities");
    check_labels(probabilities, labels);
    const int64_t B = probabilities.shape[0];
    double total = 0.0;
    for (int64_t b = 0; b < B; ++b)
        total -= std::log(std::max(probabilities.at2(b, labels[b]), 1e-12));
    return total / static_cast<double>(B);
}

double cross_entropy_from_logits(const Tensor& logits, const std::vector<int>& labels,
                                 Tensor* probs_out) {
    if (logits.rank() != 2) throw ShapeError("cross entropy expects rank-2 logits");
    check_labels(logits, labels);
    const int64_t B = logits.shape[0], C = logits.shape[1];
    Tensor probs = logits;
    double total = 0.0;
    for (int64_t b = 0; b < B; ++b) {
        double m = logits.at2(b, 0);
        for (int64_t c = 1; c < C; ++c) m = std::max(m, logits.at2(b, c));
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) z += std::exp(logits.at2(b, c) - m);
        const double lse = m + std::log(z);
        total += lse - logits.at2(b, labels[b]);
        for (int64_t c = 0; c < C; ++c) probs.at2(b, c) = std::exp(logits.at2(b, c) - lse);
    }
    if (probs_out) *probs_out = std::move(probs);
    return total / static_cast<double>(B);
}

// ---------------------------------------------------------------------------
// network assembly
// ---------------------------------------------------------------------------

namespace {

Tensor he_normal(const std::vector<int64_t>& shape, int64_t fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& x : t.data) x = rng.normal() * sd;
    return t;
}

void add_bn_params(std::map<std::string, Tensor>& params, const std::string& prefix, int64_t c) {
    Tensor ones = Tensor::zeros({c});
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    params[prefix + "gamma"] = ones;
    params[prefix + "beta"] = Tensor::zeros({c});
    params[prefix + "running_mean"] = Tensor::zeros({c});
    params[prefix + "running_var"] = ones;
}

Tensor pad_channels(const Tensor& input, int64_t out_ch) {
    const int64_t B = input.shape[0], L = input.shape[1], Cin = input.shape[2];
    Tensor out = Tensor::zeros({B, L, out_ch});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < L; ++t)
            for (int64_t c = 0; c < Cin; ++c) out.at3(b, t, c) = input.at3(b, t, c);
    return out;
}

Tensor take_channels(const Tensor& input, int64_t n_ch) {
    const int64_t B = input.shape[0], L = input.shape[1];
    Tensor out = Tensor::zeros({B, L, n_ch});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < L; ++t)
            for (int64_t c = 0; c < n_ch; ++c) out.at3(b, t, c) = input.at3(b, t, c);
    return out;
}

Tensor add_relu(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("residual join shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double s = out.data[i] + b.data[i];
        out.data[i] = s > 0.0 ? s : 0.0;
    }
    return out;
}

} // namespace

Network Network::init(const NetworkConfig& config, Rng& rng) {
    config.validate();
    Network net;
    net.config = config;
    const int64_t K = config.kernel_width;
    net.params["stem.conv"] = he_normal({K, 1, config.initial_filters}, K, rng);
    add_bn_params(net.params, "stem.bn.", config.initial_filters);
    for (int b = 1; b <= config.n_res_blocks; ++b) {
        const BlockPlan p = plan_block(config, b);
        const std::string pre = block_prefix(b);
        net.params[pre + "conv1"] = he_normal({K, p.in_ch, p.out_ch}, K * p.in_ch, rng);
        add_bn_params(net.params, pre + "bn1.", p.out_ch);
        net.params[pre + "conv2"] = he_normal({K, p.out_ch, p.out_ch}, K * p.out_ch, rng);
        add_bn_params(net.params, pre + "bn2.", p.out_ch);
    }
    const int64_t cf = config.final_channels();
    net.params["dense.weight"] = he_normal({cf, config.n_classes}, cf, rng);
    net.params["dense.bias"] = Tensor::zeros({config.n_classes});
    return net;
}

std::vector<std::string> Network::trainable_names() const {
    std::vector<std::string> names = {"stem.conv", "stem.bn.gamma", "stem.bn.beta"};
    for (int b = 1; b <= config.n_res_blocks; ++b) {
        const std::string pre = block_prefix(b);
        for (const char* s : {"conv1", "bn1.gamma", "bn1.beta", "conv2", "bn2.gamma", "bn2.beta"})
            names.push_back(pre + s);
    }
    names.push_back("dense.weight");
    names.push_back("dense.bias");
    return names;
}

size_t Network::conv_kernel_count() const {
    size_t n = 0;
    for (const auto& [name, t] : params) {
        (void)t;
        if (name == "stem.conv" || name.ends_with(".conv1") || name.ends_with(".conv2")) ++n;
    }
    return n;
}

namespace {

void check_input_batch(const Tensor& batch, const NetworkConfig& cfg) {
    check_rank3(batch, "network input");
    if (batch.shape[1] != cfg.input_length || batch.shape[2] != 1)
        throw ShapeError("network expects [N," + std::to_string(cfg.input_length) +
                         ",1] input, got " + batch.shape_str());
    if (batch.shape[0] < 1) throw ShapeError("network input batch is empty");
}

} // namespace

Tensor Network::forward_eval(const Tensor& batch, ShapeTrace* trace, Tensor* pre_gap_features) const {
    check_input_batch(batch, config);
    auto record = [&](const std::string& name, const Tensor& t) {
        if (trace) trace->entries.emplace_back(name, t.shape);
    };
    record("input", batch);
    Tensor x = conv1d_forward(batch, params.at("stem.conv"), 1);
    x = batchnorm_eval(x, params.at("stem.bn.gamma"), params.at("stem.bn.beta"),
                       params.at("stem.bn.running_mean"), params.at("stem.bn.running_var"),
                       kBnEpsilon);
    x = relu_forward(x);
    record("stem", x);
    for (int b = 1; b <= config.n_res_blocks; ++b) {
        const BlockPlan p = plan_block(config, b);
        const std::string pre = block_prefix(b);
        Tensor m = conv1d_forward(x, params.at(pre + "conv1"), p.conv1_stride);
        m = batchnorm_eval(m, params.at(pre + "bn1.gamma"), params.at(pre + "bn1.beta"),
                           params.at(pre + "bn1.running_mean"), params.at(pre + "bn1.running_var"),
                           kBnEpsilon);
        m = relu_forward(m);
        m = conv1d_forward(m, params.at(pre + "conv2"), 1);
        m = batchnorm_eval(m, params.at(pre + "bn2.gamma"), params.at(pre + "bn2.beta"),
                           params.at(pre + "bn2.running_mean"), params.at(pre + "bn2.running_var"),
                           kBnEpsilon);
        if (p.pool_main) m = maxpool2_forward(m, nullptr);
        Tensor s = x;
        if (p.pool_shortcut) s = maxpool2_forward(s, nullptr);
        if (p.pad_channels) s = pad_channels(s, p.out_ch);
        x = add_relu(m, s);
        record("block" + std::to_string(b), x);
    }
    if (pre_gap_features) *pre_gap_features = x;
    Tensor g = gap_forward(x);
    record("gap", g);
    Tensor logits = dense_forward(g, params.at("dense.weight"), params.at("dense.bias"));
    record("logits", logits);
    return softmax(logits);
}

Tensor Network::forward_train(const Tensor& batch, Rng& dropout_rng, ForwardCache& cache,
                              bool update_running) {
    check_input_batch(batch, config);
    cache = ForwardCache{};
    cache.input = batch;
    Tensor x = conv1d_forward(batch, params.at("stem.conv"), 1);
    x = batchnorm_train(x, params.at("stem.bn.gamma"), params.at("stem.bn.beta"),
                        params.at("stem.bn.running_mean"), params.at("stem.bn.running_var"),
                        kBnEpsilon, kBnMomentum, update_running, &cache.stem_bn);
    x = relu_forward(x);
    cache.stem_act = x;
    cache.blocks.resize(config.n_res_blocks);
    for (int b = 1; b <= config.n_res_blocks; ++b) {
        auto& bc = cache.blocks[b - 1];
        const BlockPlan p = plan_block(config, b);
        const std::string pre = block_prefix(b);
        bc.in = x;
        Tensor m = conv1d_forward(x, params.at(pre + "conv1"), p.conv1_stride);
        m = batchnorm_train(m, params.at(pre + "bn1.gamma"), params.at(pre + "bn1.beta"),
                            params.at(pre + "bn1.running_mean"), params.at(pre + "bn1.running_var"),
                            kBnEpsilon, kBnMomentum, update_running, &bc.bn1);
        m = relu_forward(m);
        bc.relu1_out = m;
        if (config.dropout_rate > 0.0)
            m = dropout_forward(m, config.dropout_rate, dropout_rng, &bc.drop_mask);
        bc.drop1_out = m;
        m = conv1d_forward(m, params.at(pre + "conv2"), 1);
        m = batchnorm_train(m, params.at(pre + "bn2.gamma"), params.at(pre + "bn2.beta"),
                            params.at(pre + "bn2.running_mean"), params.at(pre + "bn2.running_var"),
                            kBnEpsilon, kBnMomentum, update_running, &bc.bn2);
        if (p.pool_main) m = maxpool2_forward(m, &bc.main_pool_argmax);
        Tensor s = x;
        if (p.pool_shortcut) s = maxpool2_forward(s, &bc.shortcut_argmax);
        if (p.pad_channels) s = pad_channels(s, p.out_ch);
        x = add_relu(m, s);
        bc.sum_out = x;
    }
    cache.gap_out = gap_forward(x);
    Tensor logits = dense_forward(cache.gap_out, params.at("dense.weight"), params.at("dense.bias"));
    cache.probs = softmax(logits);
    cache.valid = true;
    return cache.probs;
}

std::map<std::string, Tensor> Network::backward(const ForwardCache& cache,
                                                const std::vector<int>& labels,
                                                double* loss_out) const {
    if (!cache.valid) throw std::logic_error("backward called before forward_train");
    check_labels(cache.probs, labels);
    const int64_t B = cache.probs.shape[0], Nc = cache.probs.shape[1];
    if (loss_out) *loss_out = cross_entropy_loss(cache.probs, labels);

    std::map<std::string, Tensor> grads;

    // d(mean CE)/d(logits) for a softmax head
    Tensor d_logits = cache.probs;
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < Nc; ++c) d_logits.at2(b, c) /= static_cast<double>(B);
        d_logits.at2(b, labels[b]) -= 1.0 / static_cast<double>(B);
    }

    Tensor d_gap;
    dense_backward(cache.gap_out, params.at("dense.weight"), d_logits, &d_gap,
                   &grads["dense.weight"], &grads["dense.bias"]);

    const Tensor& last = cache.blocks.empty() ? cache.stem_act : cache.blocks.back().sum_out;
    Tensor d = gap_backward(d_gap, last.shape[1]);

    for (int b = config.n_res_blocks; b >= 1; --b) {
        const auto& bc = cache.blocks[b - 1];
        const BlockPlan p = plan_block(config, b);
        const std::string pre = block_prefix(b);

        Tensor d_sum = relu_backward(bc.sum_out, d);

        // shortcut branch
        Tensor d_short = p.pad_channels ? take_channels(d_sum, p.in_ch) : d_sum;
        Tensor d_in_short = p.pool_shortcut
                                ? maxpool2_backward(d_short, bc.shortcut_argmax, bc.in.shape[1])
                                : std::move(d_short);

        // main branch
        Tensor d_main = p.pool_main
                            ? maxpool2_backward(d_sum, bc.main_pool_argmax, bc.bn2.xhat.shape[1])
                            : std::move(d_sum);
        Tensor d_conv2;
        batchnorm_backward(bc.bn2, params.at(pre + "bn2.gamma"), d_main, &d_conv2,
                           &grads[pre + "bn2.gamma"], &grads[pre + "bn2.beta"]);
        Tensor d_drop;
        conv1d_backward(bc.drop1_out, params.at(pre + "conv2"), 1, d_conv2, &d_drop,
                        &grads[pre + "conv2"]);
        Tensor d_relu1 = config.dropout_rate > 0.0
                             ? dropout_backward(d_drop, bc.drop_mask, config.dropout_rate)
                             : std::move(d_drop);
        Tensor d_bn1 = relu_backward(bc.relu1_out, d_relu1);
        Tensor d_conv1;
        batchnorm_backward(bc.bn1, params.at(pre + "bn1.gamma"), d_bn1, &d_conv1,
                           &grads[pre + "bn1.gamma"], &grads[pre + "bn1.beta"]);
        Tensor d_in_main;
        conv1d_backward(bc.in, params.at(pre + "conv1"), p.conv1_stride, d_conv1, &d_in_main,
                        &grads[pre + "conv1"]);

        if (!d_in_main.same_shape(d_in_short))
            throw ShapeError("block gradient join mismatch");
        d = std::move(d_in_main);
        for (size_t i = 0; i < d.data.size(); ++i) d.data[i] += d_in_short.data[i];
    }

    Tensor d_bn_stem = relu_backward(cache.stem_act, d);
    Tensor d_conv_stem;
    batchnorm_backward(cache.stem_bn, params.at("stem.bn.gamma"), d_bn_stem, &d_conv_stem,
                       &grads["stem.bn.gamma"], &grads["stem.bn.beta"]);
    conv1d_backward(cache.input, params.at("stem.conv"), 1, d_conv_stem, nullptr,
                    &grads["stem.conv"]);
    return grads;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, int64_t t, const TrainConfig& config) {
    if (t < 1) throw std::invalid_argument("Adam step index must be >= 1");
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end())
            throw std::invalid_argument("gradient for unknown parameter " + name);
        if (!g.all_finite())
            throw std::runtime_error("non-finite gradient for parameter " + name);
        Tensor& p = it->second;
        if (!p.same_shape(g))
            throw ShapeError("gradient shape mismatch for parameter " + name);
        Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
        for (size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = config.beta1 * m.data[i] + (1.0 - config.beta1) * g.data[i];
            v.data[i] = config.beta2 * v.data[i] + (1.0 - config.beta2) * g.data[i] * g.data[i];
            const double mh = m.data[i] / bc1;
            const double vh = v.data[i] / bc2;
            p.data[i] -= config.learning_rate * mh / (std::sqrt(vh) + config.epsilon_adam);
        }
    }
    state.t = t;
}

// ---------------------------------------------------------------------------
// dataset adapters and training loop
// ---------------------------------------------------------------------------

Tensor to_input_tensor(const spectra::Dataset& dataset, int input_length) {
    if (input_length != spectra::kSpectrumSamples)
        throw ShapeError("network input length " + std::to_string(input_length) +
                         " does not match spectrum length " +
                         std::to_string(spectra::kSpectrumSamples));
    const int64_t n = static_cast<int64_t>(dataset.size());
    Tensor out = Tensor::zeros({n, input_length, 1});
    for (int64_t i = 0; i < n; ++i)
        std::copy(dataset.spectra[i].values.begin(), dataset.spectra[i].values.end(),
                  out.data.begin() + i * input_length);
    return out;
}

std::vector<int> observed_labels(const spectra::Dataset& dataset) {
    std::vector<int> labels(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) labels[i] = dataset.spectra[i].label;
    return labels;
}

namespace {

Tensor gather_rows(const Tensor& inputs, const std::vector<int64_t>& order, int64_t start,
                   int64_t count) {
    const int64_t L = inputs.shape[1], C = inputs.shape[2];
    Tensor out = Tensor::zeros({count, L, C});
    for (int64_t i = 0; i < count; ++i) {
        const int64_t src = order[start + i];
        std::copy(inputs.data.begin() + src * L * C, inputs.data.begin() + (src + 1) * L * C,
                  out.data.begin() + i * L * C);
    }
    return out;
}

void validate_train_config(const TrainConfig& c) {
    if (c.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
    if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
    if (c.epsilon_adam <= 0.0) throw ConfigError("epsilon_adam must be > 0");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
}

} // namespace

double train_one_epoch(Network& net, const Tensor& inputs, const std::vector<int>& labels,
                       const TrainConfig& config, Rng& rng, AdamState& adam, int64_t* step) {
    const int64_t n = inputs.shape[0];
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double total = 0.0;
    for (int64_t start = 0; start < n; start += config.batch_size) {
        const int64_t count = std::min<int64_t>(config.batch_size, n - start);
        Tensor batch = gather_rows(inputs, order, start, count);
        std::vector<int> batch_labels(count);
        for (int64_t i = 0; i < count; ++i) batch_labels[i] = labels[order[start + i]];
        ForwardCache cache;
        net.forward_train(batch, rng, cache, true);
        double loss = 0.0;
        auto grads = net.backward(cache, batch_labels, &loss);
        ++(*step);
        adam_step(net.params, grads, adam, *step, config);
        total += loss * static_cast<double>(count);
    }
    return total / static_cast<double>(n);
}

TrainLog train(Network& net, const spectra::Dataset& train_set, const spectra::Dataset& valid_set,
               const TrainConfig& config) {
    validate_train_config(config);
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    Tensor inputs = to_input_tensor(train_set, net.config.input_length);
    std::vector<int> labels = observed_labels(train_set);
    for (int y : labels)
        if (y < 0 || y >= net.config.n_classes)
            throw std::invalid_argument("training label " + std::to_string(y) + " out of range");

    std::vector<int> valid_labels = observed_labels(valid_set);
    bool score_valid = !valid_set.empty();
    if (score_valid) {
        const auto [lo, hi] = std::minmax_element(valid_labels.begin(), valid_labels.end());
        if (*lo == *hi) {
            log_warn("validation set has a single class; keeping final-epoch weights");
            score_valid = false;
        }
    }

    Rng rng(config.seed);
    AdamState adam;
    int64_t step = 0;
    TrainLog log;
    double best_auc = -1.0;
    std::map<std::string, Tensor> best_params;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochStats st;
        st.train_loss = train_one_epoch(net, inputs, labels, config, rng, adam, &step);
        if (score_valid) {
            Tensor probs = predict_proba(net, valid_set);
            std::vector<double> scores(probs.shape[0]);
            for (int64_t i = 0; i < probs.shape[0]; ++i) scores[i] = probs.at2(i, 1);
            st.valid_auc = eval::auc(valid_labels, scores);
            st.has_valid = true;
            if (st.valid_auc > best_auc) {
                best_auc = st.valid_auc;
                best_params = net.params;
                log.best_epoch = epoch;
            }
        }
        log.epochs.push_back(st);
    }
    if (log.best_epoch > 0) net.params = std::move(best_params);
    return log;
}

Tensor predict_proba(const Network& net, const spectra::Dataset& dataset) {
    if (dataset.empty()) return Tensor::zeros({0, net.config.n_classes});
    Tensor inputs = to_input_tensor(dataset, net.config.input_length);
    const int64_t n = inputs.shape[0], L = inputs.shape[1];
    const int64_t chunk = 256;
    Tensor out = Tensor::zeros({n, net.config.n_classes});
    std::vector<int64_t> ident(n);
    std::iota(ident.begin(), ident.end(), 0);
    for (int64_t start = 0; start < n; start += chunk) {
        const int64_t count = std::min(chunk, n - start);
        Tensor batch = gather_rows(inputs, ident, start, count);
        Tensor probs = net.forward_eval(batch);
        std::copy(probs.data.begin(), probs.data.end(),
                  out.data.begin() + start * net.config.n_classes);
        (void)L;
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'S', 'P', 'X', 'N', 'E', 'T'};

void write_doubles(std::ofstream& f, const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& f, std::vector<double>& v, const std::string& path) {
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!f) throw ParseError(path + ": truncated tensor payload");
}

json tensor_index(const std::map<std::string, Tensor>& tensors) {
    json arr = json::array();
    for (const auto& [name, t] : tensors) arr.push_back(json{{"name", name}, {"shape", t.shape}});
    return arr;
}

} // namespace

void save_network(const Network& net, const std::string& path, const AdamState* adam,
                  const TrainLog* log) {
    json header;
    header["format"] = 1;
    header["config"] = net.config;
    header["tensors"] = tensor_index(net.params);
    if (adam) {
        header["adam"] = json{{"t", adam->t}, {"m", tensor_index(adam->m)},
                              {"v", tensor_index(adam->v)}};
    }
    if (log) {
        json epochs = json::array();
        for (const auto& e : log->epochs)
            epochs.push_back(json{{"train_loss", e.train_loss},
                                  {"valid_auc", e.valid_auc},
                                  {"has_valid", e.has_valid}});
        header["log"] = json{{"best_epoch", log->best_epoch}, {"epochs", epochs}};
    }
    const std::string head = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(kMagic, sizeof(kMagic));
    const uint64_t head_len = head.size();
    f.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : net.params) {
        (void)name;
        write_doubles(f, t.data);
    }
    if (adam) {
        for (const auto& [name, t] : adam->m) {
            (void)name;
            write_doubles(f, t.data);
        }
        for (const auto& [name, t] : adam->v) {
            (void)name;
            write_doubles(f, t.data);
        }
    }
    if (!f) throw std::runtime_error("failed writing checkpoint " + path);
}

namespace {

std::map<std::string, Tensor> read_tensor_block(std::ifstream& f, const json& index,
                                                const std::string& path) {
    std::map<std::string, Tensor> out;
    for (const auto& entry : index) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
        Tensor t = Tensor::zeros(shape);
        read_doubles(f, t.data, path);
        out[name] = std::move(t);
    }
    return out;
}

} // namespace

LoadedNetwork load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[sizeof(kMagic)];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError(path + ": not a network checkpoint");
    uint64_t head_len = 0;
    f.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!f) throw ParseError(path + ": truncated header");
    std::string head(head_len, '\0');
    f.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!f) throw ParseError(path + ": truncated header");

    json header;
    try {
        header = json::parse(head);
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad checkpoint header: " + e.what());
    }

    LoadedNetwork result;
    try {
        result.net.config = header.at("config").get<NetworkConfig>();
        result.net.config.validate();
        result.net.params = read_tensor_block(f, header.at("tensors"), path);
        if (header.contains("adam")) {
            AdamState adam;
            adam.t = header["adam"].at("t").get<int64_t>();
            adam.m = read_tensor_block(f, header["adam"].at("m"), path);
            adam.v = read_tensor_block(f, header["adam"].at("v"), path);
            result.adam = std::move(adam);
        }
        if (header.contains("log")) {
            result.log.best_epoch = header["log"].at("best_epoch").get<int>();
            for (const auto& e : header["log"].at("epochs")) {
                EpochStats st;
                st.train_loss = e.at("train_loss").get<double>();
                st.valid_auc = e.at("valid_auc").get<double>();
                st.has_valid = e.at("has_valid").get<bool>();
                result.log.epochs.push_back(st);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad checkpoint header: " + e.what());
    }
    return result;
}

} // namespace specmix::nn
