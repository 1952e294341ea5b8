// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "featsplat/rng.hpp"
#include "featsplat/types.hpp"

namespace fsplat::test {

// Identity-pose camera looking down +z with the principal point at the
// given pixel.
inline Camera axis_camera(int width, int height, double focal, double cx, double cy) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = cx;
    cam.cy = cy;
    cam.near_clip = 0.01;
    cam.far_clip = 100.0;
    return cam;
}

inline Gaussian make_gaussian(Vec3 mean, double scale, double opacity,
                              std::vector<double> feature) {
    Gaussian g;
    g.mean = mean;
    g.scale = {scale, scale, scale};
    g.opacity = opacity;
    g.color = {0.5, 0.5, 0.5};
    g.feature = std::move(feature);
    return g;
}

inline Quat random_unit_quat(Rng& rng) {
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return q.normalized();
}

// Random field in a [-1,1]^3 box with anisotropic scales and rotations.
inline GaussianField random_field(std::size_t n, int dim, std::uint64_t seed,
                                  double scale_lo = 0.03, double scale_hi = 0.15) {
    Rng rng(seed);
    GaussianField field;
    field.feature_dim = dim;
    field.gaussians.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian g;
        g.mean = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        g.scale = {rng.uniform(scale_lo, scale_hi), rng.uniform(scale_lo, scale_hi),
                   rng.uniform(scale_lo, scale_hi)};
        g.rotation = random_unit_quat(rng);
        g.opacity = rng.uniform(0.1, 1.0);
        g.color = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
        g.feature.resize(static_cast<std::size_t>(dim));
        for (double& v : g.feature) v = rng.uniform01();
        field.gaussians.push_back(std::move(g));
    }
    return field;
}

// Camera on a circle of the given radius looking at the origin (test-local
// convenience; the scene module owns the production version).
inline Camera looking_at_origin(double azimuth, double radius, double height,
                                int width, int height_px, double focal) {
    const Vec3 eye{radius * std::cos(azimuth), radius * std::sin(azimuth), height};
    const Vec3 forward = (-eye).normalized();
    const Vec3 up{0.0, 0.0, 1.0};
    Vec3 down_raw = forward * up.dot(forward) - up;
    if (down_raw.norm() < 1e-9) down_raw = Vec3{1.0, 0.0, 0.0};
    const Vec3 down = down_raw.normalized();
    const Vec3 right = down.cross(forward);
    Camera cam;
    cam.width = width;
    cam.height = height_px;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height_px - 1);
    cam.near_clip = 0.01;
    cam.far_clip = 100.0;
    cam.rotation = Mat3{{right.x, right.y, right.z, down.x, down.y, down.z,
                         forward.x, forward.y, forward.z}};
    cam.translation = -(cam.rotation * eye);
    return cam;
}

// Eigenvalues of a symmetric 3x3 matrix by cyclic jacobi rotations, sorted
// ascending. Independent of any library code under test.
inline std::array<double, 3> symmetric_eigenvalues(Mat3 m) {
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(m.at(0, 1)) + std::abs(m.at(0, 2)) + std::abs(m.at(1, 2));
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = m.at(p, q);
                if (std::abs(apq) < 1e-18) continue;
                const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                Mat3 r = Mat3::identity();
                r.at(p, p) = c;
                r.at(q, q) = c;
                r.at(p, q) = s;
                r.at(q, p) = -s;
                m = r.transposed() * m * r;
            }
        }
    }
    std::array<double, 3> ev{m.at(0, 0), m.at(1, 1), m.at(2, 2)};
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace fsplat::test
