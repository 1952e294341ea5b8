// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "featsplat/errors.hpp"
#include "featsplat/io.hpp"
#include "featsplat/rng.hpp"

namespace fsplat {
namespace {

constexpr char kModelMagic[4] = {'F', 'S', 'A', 'E'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kNormFloor = 1e-30;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

bool has_params(const Layer& layer) {
    return layer.kind == LayerKind::linear || layer.kind == LayerKind::batchnorm;
}

bool stack_has_batchnorm(const AEModel& model, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
        if (model.layers[i].kind == LayerKind::batchnorm) return true;
    }
    return false;
}

void check_batch_dim(const Batch& x, int expected, const char* what) {
    if (x.cols != expected) {
        std::ostringstream msg;
        msg << what << ": input dimension " << x.cols << " does not match layer dimension "
            << expected;
        throw validation_error(msg.str());
    }
}

// Cached values needed by the backward pass of one layer.
struct LayerCache {
    Batch input;
    Batch output;                       // sphere: needed for the jacobian
    std::vector<double> inv_std;        // batchnorm, per channel
    std::vector<double> mean;           // batchnorm, per channel
    std::vector<double> norms;          // sphere, per row
};

struct LayerGrads {
    std::vector<double> weight, bias;    // linear
    std::vector<double> gamma, beta;     // batchnorm
};

Batch linear_forward(const Layer& layer, const Batch& x) {
    Batch y(x.rows, layer.out);
    const bool parallel = x.rows >= 32;
#pragma omp parallel for schedule(static) if (parallel)
    for (int b = 0; b < x.rows; ++b) {
        const double* in = x.row(b);
        double* out = y.row(b);
        for (int o = 0; o < layer.out; ++o) {
            const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
            double acc = layer.bias[static_cast<std::size_t>(o)];
            for (int i = 0; i < layer.in; ++i) acc += w[i] * in[i];
            out[o] = acc;
        }
    }
    return y;
}

Batch layer_forward(const AEModel& model, Layer& layer, const Batch& x, bool training,
                    bool update_stats, LayerCache* cache) {
    if (cache) cache->input = x;
    switch (layer.kind) {
        case LayerKind::linear: {
            check_batch_dim(x, layer.in, "linear");
            return linear_forward(layer, x);
        }
        case LayerKind::batchnorm: {
            check_batch_dim(x, layer.in, "batchnorm");
            Batch y(x.rows, x.cols);
            const int c_count = x.cols;
            if (training) {
                if (x.rows < 2) {
                    throw validation_error(
                        "batchnorm: training mode requires batch size >= 2");
                }
                std::vector<double> mean(c_count, 0.0), var(c_count, 0.0);
                for (int b = 0; b < x.rows; ++b) {
                    const double* in = x.row(b);
                    for (int c = 0; c < c_count; ++c) mean[c] += in[c];
                }
                for (int c = 0; c < c_count; ++c) mean[c] /= x.rows;
                for (int b = 0; b < x.rows; ++b) {
                    const double* in = x.row(b);
                    for (int c = 0; c < c_count; ++c) {
                        const double d = in[c] - mean[c];
                        var[c] += d * d;
                    }
                }
                for (int c = 0; c < c_count; ++c) var[c] /= x.rows;

                std::vector<double> inv_std(c_count);
                for (int c = 0; c < c_count; ++c) {
                    inv_std[c] = 1.0 / std::sqrt(var[c] + model.bn_eps);
                }
                for (int b = 0; b < x.rows; ++b) {
                    const double* in = x.row(b);
                    double* out = y.row(b);
                    for (int c = 0; c < c_count; ++c) {
                        out[c] = layer.gamma[c] * (in[c] - mean[c]) * inv_std[c] +
                                 layer.beta[c];
                    }
                }
                if (update_stats) {
                    // Running variance follows the unbiased convention.
                    const double unbias =
                        x.rows > 1 ? static_cast<double>(x.rows) / (x.rows - 1) : 1.0;
                    for (int c = 0; c < c_count; ++c) {
                        layer.running_mean[c] =
                            (1.0 - model.bn_momentum) * layer.running_mean[c] +
                            model.bn_momentum * mean[c];
                        layer.running_var[c] =
                            (1.0 - model.bn_momentum) * layer.running_var[c] +
                            model.bn_momentum * var[c] * unbias;
                    }
                }
                if (cache) {
                    cache->mean = std::move(mean);
                    cache->inv_std = std::move(inv_std);
                }
            } else {
                for (int b = 0; b < x.rows; ++b) {
                    const double* in = x.row(b);
                    double* out = y.row(b);
                    for (int c = 0; c < c_count; ++c) {
                        out[c] = layer.gamma[c] * (in[c] - layer.running_mean[c]) /
                                     std::sqrt(layer.running_var[c] + model.bn_eps) +
                                 layer.beta[c];
                    }
                }
            }
            return y;
        }
        case LayerKind::gelu: {
            Batch y(x.rows, x.cols);
            for (std::size_t k = 0; k < x.data.size(); ++k) y.data[k] = gelu(x.data[k]);
            return y;
        }
        case LayerKind::sphere: {
            Batch y(x.rows, x.cols);
            std::vector<double> norms(static_cast<std::size_t>(x.rows));
            for (int b = 0; b < x.rows; ++b) {
                const double* in = x.row(b);
                double sq = 0.0;
                for (int c = 0; c < x.cols; ++c) sq += in[c] * in[c];
                const double n = std::max(std::sqrt(sq), kNormFloor);
                norms[static_cast<std::size_t>(b)] = n;
                double* out = y.row(b);
                for (int c = 0; c < x.cols; ++c) out[c] = in[c] / n;
            }
            if (cache) {
                cache->norms = std::move(norms);
                cache->output = y;
            }
            return y;
        }
    }
    throw std::logic_error("unknown layer kind");
}

Batch stack_forward(AEModel& model, const Batch& x, std::size_t begin, std::size_t end,
                    bool training, bool update_stats, std::vector<LayerCache>* caches) {
    Batch cur = x;
    for (std::size_t i = begin; i < end; ++i) {
        LayerCache* cache = caches ? &(*caches)[i] : nullptr;
        cur = layer_forward(model, model.layers[i], cur, training, update_stats, cache);
    }
    return cur;
}

Batch stack_forward_const(const AEModel& model, const Batch& x, std::size_t begin,
                          std::size_t end) {
    AEModel& mutable_model = const_cast<AEModel&>(model);
    const bool training = model.mode == AEMode::training;
    if (training && x.rows < 2 && stack_has_batchnorm(model, begin, end)) {
        throw validation_error("encode: training mode with batchnorm requires batch >= 2");
    }
    // update_stats = false keeps the const contract honest.
    return stack_forward(mutable_model, x, begin, end, training, false, nullptr);
}

// Backward through one layer given dL/dy; fills grads, returns dL/dx.
Batch layer_backward(const Layer& layer, const LayerCache& cache, const Batch& dy,
                     LayerGrads& grads) {
    switch (layer.kind) {
        case LayerKind::linear: {
            const Batch& x = cache.input;
            grads.weight.assign(layer.weight.size(), 0.0);
            grads.bias.assign(layer.bias.size(), 0.0);
            Batch dx(x.rows, layer.in);
            for (int b = 0; b < x.rows; ++b) {
                const double* in = x.row(b);
                const double* g = dy.row(b);
                double* dxr = dx.row(b);
                for (int o = 0; o < layer.out; ++o) {
                    const double go = g[o];
                    grads.bias[static_cast<std::size_t>(o)] += go;
                    double* dw =
                        grads.weight.data() + static_cast<std::size_t>(o) * layer.in;
                    const double* w =
                        layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
                    for (int i = 0; i < layer.in; ++i) {
                        dw[i] += go * in[i];
                        dxr[i] += go * w[i];
                    }
                }
            }
            return dx;
        }
        case LayerKind::batchnorm: {
            const Batch& x = cache.input;
            const int rows = x.rows, c_count = x.cols;
            grads.gamma.assign(layer.gamma.size(), 0.0);
            grads.beta.assign(layer.beta.size(), 0.0);

            std::vector<double> sum_dy(c_count, 0.0), sum_dy_xhat(c_count, 0.0);
            for (int b = 0; b < rows; ++b) {
                const double* in = x.row(b);
                const double* g = dy.row(b);
                for (int c = 0; c < c_count; ++c) {
                    const double xhat = (in[c] - cache.mean[c]) * cache.inv_std[c];
                    sum_dy[c] += g[c];
                    sum_dy_xhat[c] += g[c] * xhat;
                }
            }
            for (int c = 0; c < c_count; ++c) {
                grads.beta[c] = sum_dy[c];
                grads.gamma[c] = sum_dy_xhat[c];
            }

            Batch dx(rows, c_count);
            const double inv_rows = 1.0 / rows;
            for (int b = 0; b < rows; ++b) {
                const double* in = x.row(b);
                const double* g = dy.row(b);
                double* dxr = dx.row(b);
                for (int c = 0; c < c_count; ++c) {
                    const double xhat = (in[c] - cache.mean[c]) * cache.inv_std[c];
                    dxr[c] = layer.gamma[c] * cache.inv_std[c] *
                             (g[c] - inv_rows * sum_dy[c] - xhat * inv_rows * sum_dy_xhat[c]);
                }
            }
            return dx;
        }
        case LayerKind::gelu: {
            const Batch& x = cache.input;
            Batch dx(x.rows, x.cols);
            for (std::size_t k = 0; k < x.data.size(); ++k) {
                dx.data[k] = dy.data[k] * gelu_grad(x.data[k]);
            }
            return dx;
        }
        case LayerKind::sphere: {
            const Batch& y = cache.output;
            Batch dx(y.rows, y.cols);
            for (int b = 0; b < y.rows; ++b) {
                const double* yr = y.row(b);
                const double* g = dy.row(b);
                double* dxr = dx.row(b);
                double y_dot_g = 0.0;
                for (int c = 0; c < y.cols; ++c) y_dot_g += yr[c] * g[c];
                const double inv_n = 1.0 / cache.norms[static_cast<std::size_t>(b)];
                for (int c = 0; c < y.cols; ++c) {
                    dxr[c] = (g[c] - yr[c] * y_dot_g) * inv_n;
                }
            }
            return dx;
        }
    }
    throw std::logic_error("unknown layer kind");
}

struct LossGrad {
    double loss = 0.0;
    Batch grad;  // dL/dprediction
};

LossGrad recon_loss_grad(const Batch& target, const Batch& pred, double mse_w,
                         double cos_w) {
    if (target.rows != pred.rows || target.cols != pred.cols) {
        throw validation_error("reconstruction loss: target/prediction shape mismatch");
    }
    LossGrad out;
    out.grad = Batch(pred.rows, pred.cols);
    const double inv_rows = 1.0 / pred.rows;
    for (int b = 0; b < pred.rows; ++b) {
        const double* x = target.row(b);
        const double* p = pred.row(b);
        double* g = out.grad.row(b);
        double diff_sq = 0.0, dot = 0.0, x_sq = 0.0, p_sq = 0.0;
        for (int c = 0; c < pred.cols; ++c) {
            const double d = p[c] - x[c];
            diff_sq += d * d;
            dot += p[c] * x[c];
            x_sq += x[c] * x[c];
            p_sq += p[c] * p[c];
        }
        out.loss += mse_w * diff_sq * inv_rows;
        for (int c = 0; c < pred.cols; ++c) {
            g[c] = 2.0 * mse_w * (p[c] - x[c]) * inv_rows;
        }
        const double x_norm = std::sqrt(x_sq), p_norm = std::sqrt(p_sq);
        if (x_norm >= 1e-12 && p_norm >= 1e-12) {
            const double cos = dot / (x_norm * p_norm);
            out.loss += cos_w * (1.0 - cos) * inv_rows;
            const double inv_xp = 1.0 / (x_norm * p_norm);
            const double inv_pp = 1.0 / p_sq;
            for (int c = 0; c < pred.cols; ++c) {
                g[c] += -cos_w * inv_rows * (x[c] * inv_xp - cos * p[c] * inv_pp);
            }
        }
    }
    return out;
}

// Full training-mode pass: loss and gradients for every parameter.
double loss_and_grads(AEModel& model, const Batch& x, double mse_w, double cos_w,
                      bool update_stats, std::vector<LayerGrads>& grads) {
    std::vector<LayerCache> caches(model.layers.size());
    const Batch pred =
        stack_forward(model, x, 0, model.layers.size(), true, update_stats, &caches);
    LossGrad lg = recon_loss_grad(x, pred, mse_w, cos_w);

    grads.assign(model.layers.size(), LayerGrads{});
    Batch grad = std::move(lg.grad);
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        grad = layer_backward(model.layers[i], caches[i], grad, grads[i]);
    }
    return lg.loss;
}

void validate_config(const AEConfig& config) {
    if (config.encoder_dims.size() < 2 || config.decoder_dims.size() < 2) {
        throw validation_error("ae config: encoder and decoder need at least two dims");
    }
    if (config.encoder_dims.back() != config.decoder_dims.front()) {
        throw validation_error(
            "ae config: encoder last dim must equal decoder first dim");
    }
    if (config.decoder_dims.back() != config.encoder_dims.front()) {
        throw validation_error(
            "ae config: decoder last dim must equal encoder first dim");
    }
    for (int d : config.encoder_dims) {
        if (d < 1) throw validation_error("ae config: encoder dims must be positive");
    }
    for (int d : config.decoder_dims) {
        if (d < 1) throw validation_error("ae config: decoder dims must be positive");
    }
    if (!(config.lr > 0.0)) throw validation_error("ae config: lr must be positive");
    if (config.batch_size < 1) {
        throw validation_error("ae config: batch size must be positive");
    }
    if (config.epochs < 1) throw validation_error("ae config: epochs must be positive");
    if (config.weight_decay < 0.0) {
        throw validation_error("ae config: weight decay must be non-negative");
    }
}

Layer make_linear(int in, int out, Rng& rng) {
    Layer l;
    l.kind = LayerKind::linear;
    l.in = in;
    l.out = out;
    l.weight.resize(static_cast<std::size_t>(in) * out);
    const double bound = std::sqrt(6.0 / (in + out));
    for (double& w : l.weight) w = rng.uniform(-bound, bound);
    l.bias.assign(static_cast<std::size_t>(out), 0.0);
    return l;
}

Layer make_batchnorm(int dim) {
    Layer l;
    l.kind = LayerKind::batchnorm;
    l.in = l.out = dim;
    l.gamma.assign(static_cast<std::size_t>(dim), 1.0);
    l.beta.assign(static_cast<std::size_t>(dim), 0.0);
    l.running_mean.assign(static_cast<std::size_t>(dim), 0.0);
    l.running_var.assign(static_cast<std::size_t>(dim), 1.0);
    return l;
}

Layer make_plain(LayerKind kind, int dim) {
    Layer l;
    l.kind = kind;
    l.in = l.out = dim;
    return l;
}

}  // namespace

void adamw_step(std::vector<double>& param, const std::vector<double>& grad,
                AdamState& state, double lr, double weight_decay, std::int64_t t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (state.m.empty()) {
        state.m.assign(param.size(), 0.0);
        state.v.assign(param.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t k = 0; k < param.size(); ++k) {
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
        const double mhat = state.m[k] / bc1;
        const double vhat = state.v[k] / bc2;
        param[k] -= lr * weight_decay * param[k];
        param[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

int AEModel::input_dim() const {
    return layers.empty() ? 0 : layers.front().in;
}

int AEModel::latent_dim() const {
    return encoder_layer_count == 0 ? 0 : layers[encoder_layer_count - 1].out;
}

std::size_t AEModel::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) {
        n += l.weight.size() + l.bias.size() + l.gamma.size() + l.beta.size();
    }
    return n;
}

AEModel build_model(const AEConfig& config) {
    validate_config(config);
    Rng rng(config.seed);
    AEModel model;
    const std::vector<int>& enc = config.encoder_dims;
    for (std::size_t i = 0; i + 1 < enc.size(); ++i) {
        model.layers.push_back(make_linear(enc[i], enc[i + 1], rng));
        if (i + 2 < enc.size()) {
            model.layers.push_back(make_batchnorm(enc[i + 1]));
            model.layers.push_back(make_plain(LayerKind::gelu, enc[i + 1]));
        }
    }
    model.layers.push_back(make_plain(LayerKind::sphere, enc.back()));
    model.encoder_layer_count = model.layers.size();

    const std::vector<int>& dec = config.decoder_dims;
    for (std::size_t i = 0; i + 1 < dec.size(); ++i) {
        model.layers.push_back(make_linear(dec[i], dec[i + 1], rng));
        if (i + 2 < dec.size()) {
            model.layers.push_back(make_plain(LayerKind::gelu, dec[i + 1]));
        }
    }
    return model;
}

Batch encode(const AEModel& model, const Batch& x) {
    if (model.encoder_layer_count == 0) throw validation_error("encode: empty model");
    check_batch_dim(x, model.layers.front().in, "encode");
    return stack_forward_const(model, x, 0, model.encoder_layer_count);
}

Batch decode(const AEModel& model, const Batch& z) {
    if (model.encoder_layer_count >= model.layers.size()) {
        throw validation_error("decode: model has no decoder layers");
    }
    check_batch_dim(z, model.layers[model.encoder_layer_count].in, "decode");
    return stack_forward_const(model, z, model.encoder_layer_count, model.layers.size());
}

Batch reconstruct(const AEModel& model, const Batch& x) {
    return decode(model, encode(model, x));
}

double reconstruction_loss(const Batch& target, const Batch& prediction,
                           double mse_weight, double cosine_weight) {
    return recon_loss_grad(target, prediction, mse_weight, cosine_weight).loss;
}

TrainResult train(const AEConfig& config, const Batch& data) {
    validate_config(config);
    if (data.cols != config.encoder_dims.front()) {
        throw validation_error("train: data dimension does not match encoder input");
    }
    if (data.rows < 2) throw validation_error("train: need at least two samples");

    TrainResult result;
    result.model = build_model(config);
    result.model.mode = AEMode::training;

    Rng shuffle_rng(config.seed);
    std::vector<int> order(static_cast<std::size_t>(data.rows));
    std::iota(order.begin(), order.end(), 0);

    std::vector<AdamState> states(result.model.layers.size() * 4);
    std::vector<LayerGrads> grads;
    std::int64_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the pinned rng.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.bounded(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t epoch_samples = 0;
        for (int start = 0; start < data.rows; start += config.batch_size) {
            const int count = std::min(config.batch_size, data.rows - start);
            if (count < 2) continue;  // degenerate tail batch, batchnorm needs >= 2
            Batch batch(count, data.cols);
            for (int b = 0; b < count; ++b) {
                std::copy_n(data.row(order[static_cast<std::size_t>(start + b)]),
                            data.cols, batch.row(b));
            }

            const double loss = loss_and_grads(result.model, batch, config.mse_weight,
                                               config.cosine_weight, true, grads);
            ++step;
            for (std::size_t li = 0; li < result.model.layers.size(); ++li) {
                Layer& layer = result.model.layers[li];
                if (!has_params(layer)) continue;
                if (layer.kind == LayerKind::linear) {
                    adamw_step(layer.weight, grads[li].weight, states[li * 4 + 0],
                               config.lr, config.weight_decay, step);
                    adamw_step(layer.bias, grads[li].bias, states[li * 4 + 1], config.lr,
                               config.weight_decay, step);
                } else {
                    adamw_step(layer.gamma, grads[li].gamma, states[li * 4 + 2],
                               config.lr, config.weight_decay, step);
                    adamw_step(layer.beta, grads[li].beta, states[li * 4 + 3], config.lr,
                               config.weight_decay, step);
                }
            }
            epoch_loss += loss * count;
            epoch_samples += static_cast<std::size_t>(count);
        }
        if (epoch_samples == 0) {
            throw validation_error("train: no trainable batch (all batches < 2 samples)");
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_samples));
    }

    result.model.mode = AEMode::inference;
    return result;
}

double grad_check(const AEModel& model, const Batch& x, double epsilon,
                  double mse_weight, double cosine_weight) {
    AEModel work = model;
    work.mode = AEMode::training;

    std::vector<LayerGrads> analytic;
    loss_and_grads(work, x, mse_weight, cosine_weight, false, analytic);

    const auto loss_at = [&](AEModel& m) {
        const Batch pred = stack_forward(m, x, 0, m.layers.size(), true, false, nullptr);
        return recon_loss_grad(x, pred, mse_weight, cosine_weight).loss;
    };

    double max_rel_err = 0.0;
    const auto check_block = [&](std::vector<double>& param,
                                 const std::vector<double>& grad) {
        for (std::size_t k = 0; k < param.size(); ++k) {
            const double saved = param[k];
            param[k] = saved + epsilon;
            const double plus = loss_at(work);
            param[k] = saved - epsilon;
            const double minus = loss_at(work);
            param[k] = saved;
            const double numeric = (plus - minus) / (2.0 * epsilon);
            const double denom = std::max(1e-8, std::abs(grad[k]) + std::abs(numeric));
            max_rel_err = std::max(max_rel_err, std::abs(grad[k] - numeric) / denom);
        }
    };

    for (std::size_t li = 0; li < work.layers.size(); ++li) {
        Layer& layer = work.layers[li];
        if (layer.kind == LayerKind::linear) {
            check_block(layer.weight, analytic[li].weight);
            check_block(layer.bias, analytic[li].bias);
        } else if (layer.kind == LayerKind::batchnorm) {
            check_block(layer.gamma, analytic[li].gamma);
            check_block(layer.beta, analytic[li].beta);
        }
    }
    return max_rel_err;
}

void save_model(const std::filesystem::path& path, const AEModel& model) {
    AtomicWriter atomic(path);
    std::ofstream out(atomic.temp_path(), std::ios::binary);
    if (!out) throw io_error(path.string() + ": cannot open for writing");

    const auto put = [&](const void* p, std::size_t bytes) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
    };
    const auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
    const auto put_f32_block = [&](const std::vector<double>& v) {
        std::vector<float> buf(v.begin(), v.end());
        put(buf.data(), buf.size() * sizeof(float));
    };

    put(kModelMagic, 4);
    put_u32(kModelVersion);
    put_u32(static_cast<std::uint32_t>(model.layers.size()));
    put_u32(static_cast<std::uint32_t>(model.encoder_layer_count));
    for (const Layer& l : model.layers) {
        put_u32(static_cast<std::uint32_t>(l.kind));
        put_u32(static_cast<std::uint32_t>(l.in));
        put_u32(static_cast<std::uint32_t>(l.out));
    }
    for (const Layer& l : model.layers) {
        if (l.kind == LayerKind::linear) {
            put_f32_block(l.weight);
            put_f32_block(l.bias);
        } else if (l.kind == LayerKind::batchnorm) {
            put_f32_block(l.gamma);
            put_f32_block(l.beta);
            put_f32_block(l.running_mean);
            put_f32_block(l.running_var);
        }
    }
    out.flush();
    if (!out) throw io_error(path.string() + ": write failed");
    out.close();
    atomic.commit();
}

AEModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path.string() + ": cannot open for reading");

    const auto get = [&](void* p, std::size_t bytes, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in.gcount()) != bytes) {
            throw io_error(path.string() + ": truncated payload reading " +
                           std::string(what));
        }
    };
    const auto get_u32 = [&](const char* what) {
        std::uint32_t v;
        get(&v, 4, what);
        return v;
    };
    const auto get_f32_block = [&](std::vector<double>& v, std::size_t count,
                                   const char* what) {
        std::vector<float> buf(count);
        get(buf.data(), count * sizeof(float), what);
        v.assign(buf.begin(), buf.end());
    };

    char magic[4];
    get(magic, 4, "magic");
    if (std::memcmp(magic, kModelMagic, 4) != 0) {
        throw io_error(path.string() + ": wrong magic, not a model checkpoint");
    }
    const std::uint32_t version = get_u32("version");
    if (version != kModelVersion) {
        throw io_error(path.string() + ": unsupported version " + std::to_string(version) +
                       " (supported: " + std::to_string(kModelVersion) + ")");
    }

    AEModel model;
    const std::uint32_t n_layers = get_u32("layer count");
    const std::uint32_t enc_count = get_u32("encoder layer count");
    if (n_layers > 1024 || enc_count > n_layers) {
        throw io_error(path.string() + ": implausible layer schedule");
    }
    model.encoder_layer_count = enc_count;
    model.layers.resize(n_layers);
    for (Layer& l : model.layers) {
        const std::uint32_t kind = get_u32("layer kind");
        if (kind > 3) throw io_error(path.string() + ": unknown layer kind code");
        l.kind = static_cast<LayerKind>(kind);
        l.in = static_cast<int>(get_u32("layer in"));
        l.out = static_cast<int>(get_u32("layer out"));
        if (l.in < 0 || l.out < 0 || l.in > (1 << 20) || l.out > (1 << 20)) {
            throw io_error(path.string() + ": implausible layer dimensions");
        }
    }
    for (Layer& l : model.layers) {
        if (l.kind == LayerKind::linear) {
            get_f32_block(l.weight, static_cast<std::size_t>(l.in) * l.out, "weights");
            get_f32_block(l.bias, static_cast<std::size_t>(l.out), "biases");
        } else if (l.kind == LayerKind::batchnorm) {
            get_f32_block(l.gamma, static_cast<std::size_t>(l.out), "gamma");
            get_f32_block(l.beta, static_cast<std::size_t>(l.out), "beta");
            get_f32_block(l.running_mean, static_cast<std::size_t>(l.out), "running mean");
            get_f32_block(l.running_var, static_cast<std::size_t>(l.out), "running var");
        }
    }
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw io_error(path.string() + ": trailing bytes after payload");
    return model;
}

AEConfig parse_ae_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path.string() + ": cannot open for reading");

    const auto parse_dims = [&](const std::string& value) {
        std::vector<int> dims;
        std::istringstream ls(value);
        std::string token;
        while (std::getline(ls, token, ',')) {
            try {
                dims.push_back(std::stoi(token));
            } catch (const std::exception&) {
                throw io_error(path.string() + ": malformed dimension list '" + value + "'");
            }
        }
        return dims;
    };

    AEConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw io_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
            }
            continue;
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const std::size_t b = s.find_first_not_of(" \t\r");
            const std::size_t e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        try {
            if (key == "encoder_dims") config.encoder_dims = parse_dims(value);
            else if (key == "decoder_dims") config.decoder_dims = parse_dims(value);
            else if (key == "lr") config.lr = std::stod(value);
            else if (key == "weight_decay") config.weight_decay = std::stod(value);
            else if (key == "batch_size") config.batch_size = std::stoi(value);
            else if (key == "epochs") config.epochs = std::stoi(value);
            else if (key == "seed") config.seed = std::stoull(value);
            else if (key == "mse_weight") config.mse_weight = std::stod(value);
            else if (key == "cosine_weight") config.cosine_weight = std::stod(value);
            else {
                throw io_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
            }
        } catch (const io_error&) {
            throw;
        } catch (const std::exception&) {
            throw io_error(path.string() + ":" + std::to_string(line_no) +
                           ": malformed value for '" + key + "'");
        }
    }
    validate_config(config);
    return config;
}

}  // namespace fsplat
