// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fsplat {

enum class LayerKind : std::uint32_t { linear = 0, batchnorm = 1, gelu = 2, sphere = 3 };

struct Layer {
    LayerKind kind = LayerKind::linear;
    int in = 0, out = 0;  // batchnorm/gelu/sphere: in == out

    // linear parameters, weight is out x in row-major
    std::vector<double> weight, bias;
    // batchnorm parameters and buffers
    std::vector<double> gamma, beta, running_mean, running_var;
};

enum class AEMode { training, inference };

struct AEConfig {
    std::vector<int> encoder_dims;  // first = D_hi, last = D_lo
    std::vector<int> decoder_dims;  // first = D_lo, last = D_hi
    double lr = 1e-4;
    double weight_decay = 0.0;
    int batch_size = 256;
    int epochs = 100;
    std::uint64_t seed = 0;
    double mse_weight = 1.0;
    double cosine_weight = 1.0;
};

// Row-major batch of vectors.
struct Batch {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Batch() = default;
    Batch(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const {
        return data.data() + static_cast<std::size_t>(r) * cols;
    }
};

// Encoder stack ending in a unit-sphere projection, plus a plain MLP decoder.
// The layer schedule is derived from the dims: every encoder linear except
// the last is followed by batchnorm + gelu; decoder linears are separated by
// gelu only.
struct AEModel {
    std::vector<Layer> layers;             // encoder then decoder
    std::size_t encoder_layer_count = 0;   // split point into `layers`
    AEMode mode = AEMode::inference;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    int input_dim() const;
    int latent_dim() const;
    std::size_t parameter_count() const;
};

AEModel build_model(const AEConfig& config);

// Forward through the encoder stack. Every output row has unit L2 norm.
// Training mode uses batch statistics and rejects batches of size 1 when the
// stack contains batchnorm; running statistics are not modified.
Batch encode(const AEModel& model, const Batch& x);

// Forward through the decoder stack (no final normalization).
Batch decode(const AEModel& model, const Batch& z);

// decode(encode(x)) under the model's declared mode.
Batch reconstruct(const AEModel& model, const Batch& x);

// Reconstruction loss: mse_w * |x - x^|^2 + cos_w * (1 - cos(x, x^)),
// averaged over the batch. The cosine term skips rows where either vector
// norm is below 1e-12.
double reconstruction_loss(const Batch& target, const Batch& prediction,
                           double mse_weight, double cosine_weight);

// Per-parameter-block AdamW moments.
struct AdamState {
    std::vector<double> m, v;
};

// Decoupled weight decay: the decay multiplies the parameter before the
// moment update is applied, so a zero-gradient parameter shrinks by exactly
// (1 - lr * weight_decay) per step. beta1 = 0.9, beta2 = 0.999, eps = 1e-8,
// bias-corrected; t is the 1-based step count.
void adamw_step(std::vector<double>& param, const std::vector<double>& grad,
                AdamState& state, double lr, double weight_decay, std::int64_t t);

struct TrainResult {
    AEModel model;  // left in inference mode
    std::vector<double> loss_history;  // mean loss per epoch
};

// Mini-batch AdamW on the reconstruction loss. Data is shuffled per epoch
// with the config seed; single-threaded and bit-reproducible per config.
TrainResult train(const AEConfig& config, const Batch& data);

// Central-difference check of the hand-written backprop on the full
// reconstruction loss. Returns max over parameters of
// |g_analytic - g_numeric| / max(1e-8, |g_analytic| + |g_numeric|).
double grad_check(const AEModel& model, const Batch& x, double epsilon,
                  double mse_weight = 1.0, double cosine_weight = 1.0);

// Checkpoint: magic "FSAE", version, layer schedule, then row-major float32
// parameter blocks in layer order. Little-endian throughout.
void save_model(const std::filesystem::path& path, const AEModel& model);
AEModel load_model(const std::filesystem::path& path);

// Key-value text config: one "key = value" per line, '#' comments.
AEConfig parse_ae_config(const std::filesystem::path& path);

}  // namespace fsplat
