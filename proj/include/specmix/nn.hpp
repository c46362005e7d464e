#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specmix/rng.hpp"
#include "specmix/spectra.hpp"
#include "specmix/tensor.hpp"

namespace specmix::nn {

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

/// Residual 1D CNN description. Defaults give the 8-block network: stem conv,
/// blocks that halve the length at 1/3/5/7 and double the channels at 3/5/7,
/// ending in an 18x128 feature map before global average pooling.
struct NetworkConfig {
    int input_length = 288;
    int kernel_width = 32;
    int initial_filters = 16;
    int n_res_blocks = 8;
    double dropout_rate = 0.55;
    int n_classes = 2;
    std::set<int> subsample_blocks = {1, 3, 5, 7};      // 1-indexed
    std::set<int> filter_double_blocks = {3, 5, 7};     // 1-indexed

    void validate() const;
    bool subsamples(int block) const { return subsample_blocks.count(block) > 0; }
    bool widens(int block) const { return filter_double_blocks.count(block) > 0; }
    int block_in_channels(int block) const;   // 1-indexed
    int block_out_channels(int block) const;
    int block_out_length(int block) const;    // block 0 = stem output
    int final_length() const { return block_out_length(n_res_blocks); }
    int final_channels() const { return block_out_channels(n_res_blocks); }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_adam = 1e-8;
    int batch_size = 32;
    int epochs = 30;
    uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// layer primitives
// ---------------------------------------------------------------------------

/// "Same" zero padding: output length ceil(L/stride); (kernel_width-1)/2
/// zeros on the left, the rest on the right (even widths pad one more on the
/// right, so the window is left-aligned on the input).
int conv_pad_left(int kernel_width);
int64_t conv_out_length(int64_t in_length, int stride);

/// Cross-correlation of [batch, length, in_ch] with [width, in_ch, out_ch].
Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, int stride);
void conv1d_backward(const Tensor& input, const Tensor& kernel, int stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel);

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std;   // per channel
};

/// Per-channel batch normalization over (batch x length) with biased batch
/// variance. When update_running is set the batch statistics are folded into
/// the running estimates: running = momentum * running + (1 - momentum) * batch.
Tensor batchnorm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       Tensor& running_mean, Tensor& running_var, double eps, double momentum,
                       bool update_running, BatchNormCache* cache);
Tensor batchnorm_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                      const Tensor& running_mean, const Tensor& running_var, double eps);
void batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                        Tensor* grad_input, Tensor* grad_gamma, Tensor* grad_beta);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& output, const Tensor& grad_out);

/// Inverted dropout: surviving activations are scaled by 1/(1-rate) at train
/// time so evaluation needs no rescaling.
Tensor dropout_forward(const Tensor& input, double rate, Rng& rng, std::vector<uint8_t>* mask);
Tensor dropout_backward(const Tensor& grad_out, const std::vector<uint8_t>& mask, double rate);

/// Width-2 stride-2 max pooling; odd lengths keep a final single-element
/// window so lengths match conv1d's ceil(L/2). Ties route to the lower index.
Tensor maxpool2_forward(const Tensor& input, std::vector<int32_t>* argmax);
Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<int32_t>& argmax, int64_t in_length);

Tensor gap_forward(const Tensor& input);                                  // [B,L,C] -> [B,C]
Tensor gap_backward(const Tensor& grad_out, int64_t length);

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                    Tensor* grad_input, Tensor* grad_weight, Tensor* grad_bias);

Tensor softmax(const Tensor& logits);
/// Mean over the batch of -ln p[true class]; probabilities are floored at
/// 1e-12 before the log.
double cross_entropy_loss(const Tensor& probabilities, const std::vector<int>& labels);
double cross_entropy_from_logits(const Tensor& logits, const std::vector<int>& labels, Tensor* probs_out);

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

struct ForwardCache;

struct ShapeTrace {
    std::vector<std::pair<std::string, std::vector<int64_t>>> entries;
};

/// Per-epoch training record.
struct EpochStats {
    double train_loss = 0.0;
    double valid_auc = 0.0;
    bool has_valid = false;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;   // 1-indexed epoch restored at the end, -1 = final
};

struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    int64_t t = 0;
};

class Network {
public:
    NetworkConfig config;
    /// All tensors by name: 17 conv kernels (stem + 2 per block), per-BN
    /// gamma/beta plus running mean/variance buffers, dense weight and bias.
    std::map<std::string, Tensor> params;

    static Network init(const NetworkConfig& config, Rng& rng);

    /// Trainable parameter names (running statistics excluded), in order.
    std::vector<std::string> trainable_names() const;
    size_t conv_kernel_count() const;

    /// Deterministic forward with running BN statistics and no dropout.
    Tensor forward_eval(const Tensor& batch, ShapeTrace* trace = nullptr,
                        Tensor* pre_gap_features = nullptr) const;

    /// Train-mode forward; records every intermediate needed by backward().
    /// update_running=false leaves the running BN statistics untouched
    /// (used by finite-difference checks).
    Tensor forward_train(const Tensor& batch, Rng& dropout_rng, ForwardCache& cache,
                         bool update_running = true);

    /// Reverse-mode gradients of the mean cross-entropy loss for every
    /// trainable parameter. Requires the cache of a prior forward_train.
    std::map<std::string, Tensor> backward(const ForwardCache& cache, const std::vector<int>& labels,
                                           double* loss_out = nullptr) const;
};

/// Intermediates of one train-mode forward pass, including dropout masks.
struct ForwardCache {
    bool valid = false;
    Tensor input;
    BatchNormCache stem_bn;
    Tensor stem_act;
    struct BlockCache {
        Tensor in;
        BatchNormCache bn1;
        Tensor relu1_out;
        std::vector<uint8_t> drop_mask;     // empty when dropout_rate == 0
        Tensor drop1_out;
        BatchNormCache bn2;
        std::vector<int32_t> main_pool_argmax;
        std::vector<int32_t> shortcut_argmax;
        Tensor sum_out;                     // ReLU(main + shortcut)
    };
    std::vector<BlockCache> blocks;
    Tensor gap_out, probs;
};

/// One optimizer step with bias correction; t is the 1-based step index.
/// A non-finite gradient aborts with a diagnostic naming the parameter.
void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, int64_t t, const TrainConfig& config);

/// Spectra -> [N, length, 1] input tensor plus the observed labels.
Tensor to_input_tensor(const spectra::Dataset& dataset, int input_length);
std::vector<int> observed_labels(const spectra::Dataset& dataset);

/// One pass over the data in shuffled batches; returns the mean train loss.
double train_one_epoch(Network& net, const Tensor& inputs, const std::vector<int>& labels,
                       const TrainConfig& config, Rng& rng, AdamState& adam, int64_t* step);

/// Full training loop: per-epoch loss and validation AUC, parameters restored
/// from the best-validation-AUC epoch when a validation set is given.
TrainLog train(Network& net, const spectra::Dataset& train_set, const spectra::Dataset& valid_set,
               const TrainConfig& config);

/// Deterministic eval-mode class probabilities, one row per spectrum.
Tensor predict_proba(const Network& net, const spectra::Dataset& dataset);

// checkpoint io: self-describing container with config, tensors, optional
// Adam state and epoch log; bit-exact at 64-bit precision
void save_network(const Network& net, const std::string& path, const AdamState* adam = nullptr,
                  const TrainLog* log = nullptr);
struct LoadedNetwork {
    Network net;
    std::optional<AdamState> adam;
    TrainLog log;
};
LoadedNetwork load_network(const std::string& path);

} // namespace specmix::nn
