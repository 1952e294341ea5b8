// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <vector>

#include "featsplat/raster.hpp"
#include "featsplat/types.hpp"

namespace fsplat {

struct LiftView {
    Camera camera;
    FeatureMap map;  // pseudo ground truth for this view
};

struct LiftOptions {
    int iters = 1;              // E/M cycles; > 1 only re-verifies the fixed point
    double lambda_reg = 1e-6;   // shrinks barely-covered features toward zero
    RespMode responsibility_mode = RespMode::compositing;
};

// Geometry and opacity are fixed; only the features are solved for.
struct LiftProblem {
    GaussianField field;
    std::vector<LiftView> views;
    LiftOptions options;
};

struct LiftResult {
    std::vector<double> features;      // n * d, row-major
    std::vector<double> mass;          // total responsibility mass per gaussian
    std::vector<double> loss_history;  // objective value per M-step / GD step
    std::vector<std::size_t> uncovered;  // mass <= lambda_reg; features zeroed
};

// Closed-form lift: renders responsibilities for every view (E-step) and
// sets each feature to the responsibility-weighted average of the observed
// map values, damped by lambda_reg (M-step). Weights do not depend on the
// features, so a single cycle is already the optimum of the weighted
// least-squares objective; extra iterations only confirm stationarity.
LiftResult em_lift(const LiftProblem& problem);

// Oracle for em_lift: minimizes the same objective by full-batch gradient
// descent from zero initialization. Stops when the gradient max-norm drops
// below grad_tol or the step budget runs out.
LiftResult gd_lift(const LiftProblem& problem, double lr, int max_steps,
                   double grad_tol);

// Max-norm of the objective gradient at the given features, evaluated by a
// fresh responsibility pass with direct per-pixel summation.
double lift_gradient_maxnorm(const LiftProblem& problem,
                             const std::vector<double>& features);

struct FeatureLossTerms {
    double mse = 0.0;     // mean squared feature error over covered pixels
    double cosine = 0.0;  // mean (1 - cos) over covered pixels with usable norms
    double total() const { return mse + cosine; }
};

// Rendered-vs-ground-truth feature discrepancy, MSE plus cosine distance,
// averaged over covered pixels across all views.
FeatureLossTerms feature_loss_terms(const GaussianField& field,
                                    const std::vector<LiftView>& views);
double feature_loss(const GaussianField& field, const std::vector<LiftView>& views);

// Copies a flat n*d feature block into the field.
void apply_features(GaussianField& field, const std::vector<double>& features);

}  // namespace fsplat
