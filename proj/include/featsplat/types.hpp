// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "featsplat/math.hpp"

namespace fsplat {

inline constexpr double kQuatNormTol = 1e-9;
inline constexpr double kRotOrthoTol = 1e-6;

// One anisotropic 3D Gaussian. Covariance is kept factored as scale +
// rotation so positive semi-definiteness holds by construction.
struct Gaussian {
    Vec3 mean;
    Vec3 scale{1.0, 1.0, 1.0};  // per-axis stddev, strictly positive
    Quat rotation;              // unit quaternion
    double opacity = 1.0;       // in [0, 1]
    Vec3 color;                 // rgb in [0, 1]
    std::vector<double> feature;
};

struct Violation {
    std::size_t index;  // gaussian index, or npos for field-level issues
    std::string rule;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct GaussianField {
    std::vector<Gaussian> gaussians;
    int feature_dim = 0;

    std::size_t size() const { return gaussians.size(); }

    struct Bounds {
        Vec3 min, max;
    };
    // Axis-aligned bounds over gaussian means.
    Bounds bbox() const;
};

// Empty result iff every gaussian satisfies its invariants and all feature
// dimensions agree with the field. Violations are data, not faults.
std::vector<Violation> validate_field(const GaussianField& field);

// Throws validation_error listing the first violations.
void require_valid(const GaussianField& field);

// Pinhole camera with a world-to-camera rigid pose. Camera convention:
// +z forward, +x right, +y down; pixel (ix, iy) samples continuous image
// coordinates (ix, iy).
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 rotation;     // world -> camera
    Vec3 translation;  // world -> camera
    double near_clip = 0.01, far_clip = 1000.0;

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 to_world(const Vec3& p) const {
        return rotation.transposed() * (p - translation);
    }

    std::vector<std::string> validate() const;
};

void require_valid(const Camera& cam);

// Image-space footprint of a projected gaussian.
struct Splat2D {
    Vec2 mean2d;              // pixels
    Sym2 cov2d;               // pixels^2, regularized
    double depth = 0.0;       // camera-space z
    std::size_t source_index = 0;
};

}  // namespace fsplat
