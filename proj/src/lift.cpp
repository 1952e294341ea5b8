// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/lift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "featsplat/errors.hpp"

namespace fsplat {
namespace {

void check_problem(const GaussianField& field, const std::vector<LiftView>& views) {
    require_valid(field);
    if (views.empty()) throw validation_error("lift: view list must not be empty");
    for (std::size_t t = 0; t < views.size(); ++t) {
        const LiftView& v = views[t];
        require_valid(v.camera);
        if (v.map.dim != field.feature_dim) {
            std::ostringstream msg;
            msg << "lift: view " << t << " map dimension " << v.map.dim
                << " does not match field dimension " << field.feature_dim;
            throw validation_error(msg.str());
        }
        if (v.map.width != v.camera.width || v.map.height != v.camera.height) {
            std::ostringstream msg;
            msg << "lift: view " << t << " map resolution " << v.map.width << "x"
                << v.map.height << " does not match camera resolution "
                << v.camera.width << "x" << v.camera.height;
            throw validation_error(msg.str());
        }
    }
}

// Streaming per-gaussian sums over all views: total responsibility mass,
// responsibility-weighted map values, and the constant term of the objective.
struct EStepSums {
    std::vector<double> mass;      // n
    std::vector<double> weighted;  // n * d
    std::vector<double> constant;  // n, sum R * |F|^2
};

EStepSums accumulate_estep(const LiftProblem& problem) {
    const std::size_t n = problem.field.size();
    const int dim = problem.field.feature_dim;
    EStepSums sums;
    sums.mass.assign(n, 0.0);
    sums.weighted.assign(n * static_cast<std::size_t>(dim), 0.0);
    sums.constant.assign(n, 0.0);

    RenderOptions ropts;
    ropts.responsibility_mode = problem.options.responsibility_mode;

    for (const LiftView& view : problem.views) {
        const ResponsibilityMap resp = responsibilities(problem.field, view.camera, ropts);
        const std::size_t n_pixels =
            static_cast<std::size_t>(resp.width) * resp.height;
        for (std::size_t p = 0; p < n_pixels; ++p) {
            const std::uint32_t begin = resp.offsets[p], end = resp.offsets[p + 1];
            if (begin == end) continue;
            const double* f = view.map.data.data() + p * static_cast<std::size_t>(dim);
            double norm_sq = 0.0;
            for (int d = 0; d < dim; ++d) norm_sq += f[d] * f[d];
            for (std::uint32_t e = begin; e < end; ++e) {
                const std::uint32_t i = resp.indices[e];
                const double r = resp.weights[e];
                sums.mass[i] += r;
                sums.constant[i] += r * norm_sq;
                double* acc = sums.weighted.data() + i * static_cast<std::size_t>(dim);
                for (int d = 0; d < dim; ++d) acc[d] += r * f[d];
            }
        }
    }
    return sums;
}

// Objective value: sum_i [(mass_i + lambda)|f_i|^2 - 2 f_i . s_i + c_i].
double objective(const EStepSums& sums, const std::vector<double>& features,
                 double lambda, int dim) {
    double loss = 0.0;
    for (std::size_t i = 0; i < sums.mass.size(); ++i) {
        const double* f = features.data() + i * static_cast<std::size_t>(dim);
        const double* s = sums.weighted.data() + i * static_cast<std::size_t>(dim);
        double f_sq = 0.0, f_dot_s = 0.0;
        for (int d = 0; d < dim; ++d) {
            f_sq += f[d] * f[d];
            f_dot_s += f[d] * s[d];
        }
        loss += (sums.mass[i] + lambda) * f_sq - 2.0 * f_dot_s + sums.constant[i];
    }
    return loss;
}

std::vector<std::size_t> uncovered_of(const std::vector<double>& mass, double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] <= threshold) out.push_back(i);
    }
    return out;
}

}  // namespace

LiftResult em_lift(const LiftProblem& problem) {
    check_problem(problem.field, problem.views);
    if (problem.options.iters < 1) {
        throw validation_error("em_lift: iteration count must be at least 1");
    }
    const std::size_t n = problem.field.size();
    const int dim = problem.field.feature_dim;
    const double lambda = problem.options.lambda_reg;

    LiftResult result;
    result.features.assign(n * static_cast<std::size_t>(dim), 0.0);

    std::vector<double> previous;
    for (int iter = 0; iter < problem.options.iters; ++iter) {
        const EStepSums sums = accumulate_estep(problem);
        result.mass = sums.mass;
        previous = result.features;
        for (std::size_t i = 0; i < n; ++i) {
            const double denom = sums.mass[i] + lambda;
            double* f = result.features.data() + i * static_cast<std::size_t>(dim);
            if (sums.mass[i] <= lambda) {
                std::fill(f, f + dim, 0.0);
                continue;
            }
            const double* s = sums.weighted.data() + i * static_cast<std::size_t>(dim);
            for (int d = 0; d < dim; ++d) f[d] = s[d] / denom;
        }
        result.loss_history.push_back(objective(sums, result.features, lambda, dim));

        if (iter > 0) {
            // Weights are feature-independent, so repeated cycles must be
            // stationary; anything else is an implementation fault.
            double max_change = 0.0;
            for (std::size_t k = 0; k < result.features.size(); ++k) {
                max_change = std::max(max_change,
                                      std::abs(result.features[k] - previous[k]));
            }
            if (max_change > 1e-9) {
                throw std::logic_error("em_lift: repeated E/M cycle moved the features");
            }
        }
    }
    result.uncovered = uncovered_of(result.mass, lambda);
    return result;
}

LiftResult gd_lift(const LiftProblem& problem, double lr, int max_steps,
                   double grad_tol) {
    check_problem(problem.field, problem.views);
    if (!(lr > 0.0)) throw validation_error("gd_lift: learning rate must be positive");
    if (max_steps < 1) throw validation_error("gd_lift: step budget must be at least 1");

    const std::size_t n = problem.field.size();
    const int dim = problem.field.feature_dim;
    const double lambda = problem.options.lambda_reg;
    const EStepSums sums = accumulate_estep(problem);

    LiftResult result;
    result.mass = sums.mass;
    result.features.assign(n * static_cast<std::size_t>(dim), 0.0);
    result.loss_history.push_back(objective(sums, result.features, lambda, dim));

    std::vector<double> grad(result.features.size());
    for (int step = 0; step < max_steps; ++step) {
        double max_grad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* f = result.features.data() + i * static_cast<std::size_t>(dim);
            const double* s = sums.weighted.data() + i * static_cast<std::size_t>(dim);
            double* g = grad.data() + i * static_cast<std::size_t>(dim);
            for (int d = 0; d < dim; ++d) {
                g[d] = 2.0 * ((sums.mass[i] + lambda) * f[d] - s[d]);
                max_grad = std::max(max_grad, std::abs(g[d]));
            }
        }
        if (max_grad < grad_tol) break;
        for (std::size_t k = 0; k < result.features.size(); ++k) {
            result.features[k] -= lr * grad[k];
        }
        result.loss_history.push_back(objective(sums, result.features, lambda, dim));
    }
    result.uncovered = uncovered_of(result.mass, lambda);
    return result;
}

double lift_gradient_maxnorm(const LiftProblem& problem,
                             const std::vector<double>& features) {
    check_problem(problem.field, problem.views);
    const std::size_t n = problem.field.size();
    const int dim = problem.field.feature_dim;
    if (features.size() != n * static_cast<std::size_t>(dim)) {
        throw validation_error("lift_gradient_maxnorm: feature block size mismatch");
    }

    RenderOptions ropts;
    ropts.responsibility_mode = problem.options.responsibility_mode;

    // Direct per-pixel summation of sum_x R * (f_i - F(x)), no cached sums.
    std::vector<double> grad(features.size(), 0.0);
    for (const LiftView& view : problem.views) {
        const ResponsibilityMap resp = responsibilities(problem.field, view.camera, ropts);
        const std::size_t n_pixels =
            static_cast<std::size_t>(resp.width) * resp.height;
        for (std::size_t p = 0; p < n_pixels; ++p) {
            const double* f_gt = view.map.data.data() + p * static_cast<std::size_t>(dim);
            for (std::uint32_t e = resp.offsets[p]; e < resp.offsets[p + 1]; ++e) {
                const std::uint32_t i = resp.indices[e];
                const double r = resp.weights[e];
                const double* f = features.data() + i * static_cast<std::size_t>(dim);
                double* g = grad.data() + i * static_cast<std::size_t>(dim);
                for (int d = 0; d < dim; ++d) g[d] += r * (f[d] - f_gt[d]);
            }
        }
    }
    double max_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* f = features.data() + i * static_cast<std::size_t>(dim);
        const double* g = grad.data() + i * static_cast<std::size_t>(dim);
        for (int d = 0; d < dim; ++d) {
            max_norm = std::max(max_norm,
                                std::abs(2.0 * (g[d] + problem.options.lambda_reg * f[d])));
        }
    }
    return max_norm;
}

FeatureLossTerms feature_loss_terms(const GaussianField& field,
                                    const std::vector<LiftView>& views) {
    check_problem(field, views);

    double mse_sum = 0.0, cos_sum = 0.0;
    std::size_t covered = 0, cos_count = 0;
    const int dim = field.feature_dim;

    for (const LiftView& view : views) {
        const RenderOutput rendered = render(field, view.camera);
        const std::size_t n_pixels =
            static_cast<std::size_t>(rendered.width) * rendered.height;
        for (std::size_t p = 0; p < n_pixels; ++p) {
            if (rendered.alpha[p] <= kCoverageEps) continue;
            ++covered;
            const double* pred =
                rendered.features.data.data() + p * static_cast<std::size_t>(dim);
            const double* gt = view.map.data.data() + p * static_cast<std::size_t>(dim);
            double diff_sq = 0.0, dot = 0.0, pred_sq = 0.0, gt_sq = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double diff = pred[d] - gt[d];
                diff_sq += diff * diff;
                dot += pred[d] * gt[d];
                pred_sq += pred[d] * pred[d];
                gt_sq += gt[d] * gt[d];
            }
            mse_sum += diff_sq;
            const double pred_norm = std::sqrt(pred_sq), gt_norm = std::sqrt(gt_sq);
            if (pred_norm >= 1e-12 && gt_norm >= 1e-12) {
                ++cos_count;
                cos_sum += 1.0 - dot / (pred_norm * gt_norm);
            }
        }
    }

    FeatureLossTerms terms;
    if (covered > 0) terms.mse = mse_sum / static_cast<double>(covered);
    if (cos_count > 0) terms.cosine = cos_sum / static_cast<double>(cos_count);
    return terms;
}

double feature_loss(const GaussianField& field, const std::vector<LiftView>& views) {
    return feature_loss_terms(field, views).total();
}

void apply_features(GaussianField& field, const std::vector<double>& features) {
    const std::size_t n = field.size();
    const int dim = field.feature_dim;
    if (features.size() != n * static_cast<std::size_t>(dim)) {
        throw validation_error("apply_features: feature block size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = features.data() + i * static_cast<std::size_t>(dim);
        field.gaussians[i].feature.assign(src, src + dim);
    }
}

}  // namespace fsplat
