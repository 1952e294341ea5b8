// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/project.hpp"

#include <cmath>

namespace fsplat {

Mat3 covariance_of(const Gaussian& g) {
    const Mat3 r = Mat3::from_quat(g.rotation);
    const Mat3 d = Mat3::diagonal(g.scale.x * g.scale.x, g.scale.y * g.scale.y,
                                  g.scale.z * g.scale.z);
    return r * d * r.transposed();
}

std::optional<Splat2D> project(const Gaussian& g, const Camera& cam) {
    const Vec3 p = cam.to_camera(g.mean);
    if (!(p.z > cam.near_clip && p.z < cam.far_clip)) return std::nullopt;

    const double inv_z = 1.0 / p.z;
    const Vec2 mean2d{cam.fx * p.x * inv_z + cam.cx, cam.fy * p.y * inv_z + cam.cy};

    // cov2d = J * W * Sigma * W^T * J^T with J the perspective jacobian at p.
    const Mat3 cov_world = covariance_of(g);
    const Mat3& w = cam.rotation;
    const Mat3 cov_cam = w * cov_world * w.transposed();

    const double j00 = cam.fx * inv_z;
    const double j02 = -cam.fx * p.x * inv_z * inv_z;
    const double j11 = cam.fy * inv_z;
    const double j12 = -cam.fy * p.y * inv_z * inv_z;

    // Rows of J * cov_cam.
    const double r0x = j00 * cov_cam.at(0, 0) + j02 * cov_cam.at(2, 0);
    const double r0y = j00 * cov_cam.at(0, 1) + j02 * cov_cam.at(2, 1);
    const double r0z = j00 * cov_cam.at(0, 2) + j02 * cov_cam.at(2, 2);
    const double r1y = j11 * cov_cam.at(1, 1) + j12 * cov_cam.at(2, 1);
    const double r1z = j11 * cov_cam.at(1, 2) + j12 * cov_cam.at(2, 2);

    Sym2 cov2d;
    cov2d.a = r0x * j00 + r0z * j02 + kCov2dRegularization;
    cov2d.b = r0y * j11 + r0z * j12;
    cov2d.c = r1y * j11 + r1z * j12 + kCov2dRegularization;

    const double radius = kCullSigma * std::sqrt(cov2d.eigen_max());
    if (mean2d.x + radius < 0.0 || mean2d.x - radius > cam.width - 1 ||
        mean2d.y + radius < 0.0 || mean2d.y - radius > cam.height - 1) {
        return std::nullopt;
    }

    Splat2D s;
    s.mean2d = mean2d;
    s.cov2d = cov2d;
    s.depth = p.z;
    return s;
}

}  // namespace fsplat
