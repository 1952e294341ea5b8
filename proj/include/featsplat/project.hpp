// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>

#include "featsplat/types.hpp"

namespace fsplat {

// Diagonal regularization added to every projected 2D covariance (px^2).
inline constexpr double kCov2dRegularization = 0.3;

// On-screen culling radius in units of the larger 2D stddev.
inline constexpr double kCullSigma = 3.0;

// World-space covariance R(q) * diag(s^2) * R(q)^T.
Mat3 covariance_of(const Gaussian& g);

// EWA projection of a gaussian into image space. Returns nullopt when the
// camera-space depth is outside (near, far) or the 3-sigma footprint misses
// the image entirely.
std::optional<Splat2D> project(const Gaussian& g, const Camera& cam);

}  // namespace fsplat
