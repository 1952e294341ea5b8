// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "featsplat/errors.hpp"
#include "featsplat/rng.hpp"

namespace fsplat {
namespace {

void check_spec(const SceneSpec& spec) {
    if (spec.n_gaussians < 1 || spec.n_prototypes < 1 || spec.n_views < 1) {
        throw validation_error("scene spec: all counts must be at least 1");
    }
    if (spec.n_prototypes > spec.n_gaussians) {
        throw validation_error("scene spec: n_prototypes must not exceed n_gaussians");
    }
    if (spec.feature_dim < 2) {
        throw validation_error("scene spec: feature_dim must be at least 2");
    }
    if (!(spec.extent.x > 0.0 && spec.extent.y > 0.0 && spec.extent.z > 0.0)) {
        throw validation_error("scene spec: extent must be positive in every axis");
    }
    if (spec.image_width < 1 || spec.image_height < 1) {
        throw validation_error("scene spec: image size must be at least 1x1");
    }
}

// Unit-norm prototypes with pairwise |cos| < 0.5 by rejection.
std::vector<double> draw_prototypes(std::size_t count, int dim, Rng& rng) {
    std::vector<double> protos;
    protos.reserve(count * static_cast<std::size_t>(dim));
    int attempts = 0;
    while (protos.size() < count * static_cast<std::size_t>(dim)) {
        if (++attempts > 100000) {
            throw validation_error(
                "scene spec: could not place prototypes with pairwise |cos| < 0.5; "
                "reduce n_prototypes or raise feature_dim");
        }
        std::vector<double> candidate(static_cast<std::size_t>(dim));
        double norm_sq = 0.0;
        for (double& v : candidate) {
            v = rng.normal();
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) continue;
        for (double& v : candidate) v /= norm;

        bool ok = true;
        for (std::size_t p = 0; p * dim < protos.size(); ++p) {
            double dot = 0.0;
            for (int d = 0; d < dim; ++d) {
                dot += candidate[static_cast<std::size_t>(d)] * protos[p * dim + d];
            }
            if (std::abs(dot) >= 0.5) {
                ok = false;
                break;
            }
        }
        if (ok) protos.insert(protos.end(), candidate.begin(), candidate.end());
    }
    return protos;
}

std::vector<Vec3> draw_cluster_centers(std::size_t count, const Vec3& extent, Rng& rng,
                                       double& min_separation) {
    const double e_min = std::min({extent.x, extent.y, extent.z});
    double d_min = count == 1 ? 0.0 : e_min;
    for (;;) {
        std::vector<Vec3> centers;
        bool done = true;
        for (int attempt = 0; centers.size() < count; ++attempt) {
            if (attempt > 20000) {
                done = false;
                break;
            }
            const Vec3 c{rng.uniform(-0.55 * extent.x, 0.55 * extent.x),
                         rng.uniform(-0.55 * extent.y, 0.55 * extent.y),
                         rng.uniform(-0.55 * extent.z, 0.55 * extent.z)};
            bool ok = true;
            for (const Vec3& other : centers) {
                if ((c - other).norm() < d_min) {
                    ok = false;
                    break;
                }
            }
            if (ok) centers.push_back(c);
        }
        if (done) {
            min_separation = d_min;
            return centers;
        }
        d_min *= 0.9;  // relax and retry; terminates because d_min -> 0
    }
}

FeatureMap rgb_as_map(const RenderOutput& out, int frame_id) {
    FeatureMap m(out.width, out.height, 3, frame_id);
    m.data = out.rgb;
    return m;
}

}  // namespace

Camera make_orbit_camera(double azimuth, double radius, double height, int width,
                         int height_px, double focal, double near_clip, double far_clip) {
    const Vec3 eye{radius * std::cos(azimuth), radius * std::sin(azimuth), height};
    const Vec3 forward = (-eye).normalized();
    const Vec3 world_up{0.0, 0.0, 1.0};

    Vec3 down_raw = forward * world_up.dot(forward) - world_up;
    if (down_raw.norm() < 1e-9) down_raw = Vec3{1.0, 0.0, 0.0};
    const Vec3 down = down_raw.normalized();
    const Vec3 right = down.cross(forward);

    Camera cam;
    cam.width = width;
    cam.height = height_px;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height_px - 1);
    cam.near_clip = near_clip;
    cam.far_clip = far_clip;
    cam.rotation = Mat3{{right.x, right.y, right.z,
                         down.x, down.y, down.z,
                         forward.x, forward.y, forward.z}};
    cam.translation = -(cam.rotation * eye);
    return cam;
}

SceneBundle synth_scene(const SceneSpec& spec) {
    check_spec(spec);
    Rng rng(spec.seed);

    SceneBundle bundle;
    bundle.prototype_table = draw_prototypes(spec.n_prototypes, spec.feature_dim, rng);

    double separation = 0.0;
    const std::vector<Vec3> centers =
        draw_cluster_centers(spec.n_prototypes, spec.extent, rng, separation);

    // Scale small enough that cluster supports stay well apart (separation
    // greater than 6x scale even after intra-cluster offsets).
    const double e_min = std::min({spec.extent.x, spec.extent.y, spec.extent.z});
    double scale = e_min / std::sqrt(static_cast<double>(spec.n_gaussians));
    if (spec.n_prototypes > 1) scale = std::min(scale, separation / 12.0);

    bundle.field.feature_dim = spec.feature_dim;
    bundle.field.gaussians.reserve(spec.n_gaussians);
    bundle.assignment.reserve(spec.n_gaussians);
    for (std::size_t i = 0; i < spec.n_gaussians; ++i) {
        const std::size_t cluster = i % spec.n_prototypes;
        bundle.assignment.push_back(cluster);

        // Offset inside a ball of radius 2*scale.
        Vec3 offset;
        do {
            offset = Vec3{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                          rng.uniform(-1.0, 1.0)};
        } while (offset.dot(offset) > 1.0);
        offset = offset * (2.0 * scale);

        Gaussian g;
        g.mean = centers[cluster] + offset;
        g.scale = Vec3{scale, scale, scale};
        g.rotation = Quat{};
        g.opacity = 0.9;
        g.color = Vec3{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                       rng.uniform(0.1, 0.9)};
        g.feature.assign(
            bundle.prototype_table.begin() +
                static_cast<std::ptrdiff_t>(cluster * spec.feature_dim),
            bundle.prototype_table.begin() +
                static_cast<std::ptrdiff_t>((cluster + 1) * spec.feature_dim));
        bundle.field.gaussians.push_back(std::move(g));
    }

    const double scene_radius = spec.extent.norm() + 3.0 * scale;
    const double orbit_radius =
        spec.orbit_radius > 0.0 ? spec.orbit_radius : 2.5 * spec.extent.norm();
    const double orbit_height =
        spec.orbit_height != 0.0 ? spec.orbit_height : 0.75 * spec.extent.z;
    const double cam_dist =
        std::sqrt(orbit_radius * orbit_radius + orbit_height * orbit_height);
    if (cam_dist <= scene_radius) {
        throw validation_error("scene spec: orbit radius places cameras inside the scene");
    }
    const double focal = 0.45 * std::min(spec.image_width, spec.image_height) *
                         (cam_dist - scene_radius) / scene_radius;

    bundle.cameras.reserve(spec.n_views);
    for (int v = 0; v < spec.n_views; ++v) {
        const double azimuth = 2.0 * std::numbers::pi * v / spec.n_views;
        bundle.cameras.push_back(make_orbit_camera(
            azimuth, orbit_radius, orbit_height, spec.image_width, spec.image_height,
            focal, 0.05 * cam_dist, 4.0 * (cam_dist + scene_radius)));
    }

    bundle.gt_feature_maps.reserve(spec.n_views);
    bundle.gt_rgb.reserve(spec.n_views);
    for (int v = 0; v < spec.n_views; ++v) {
        RenderOutput out = render(bundle.field, bundle.cameras[static_cast<std::size_t>(v)]);
        out.features.frame_id = v;
        bundle.gt_feature_maps.push_back(std::move(out.features));
        bundle.gt_rgb.push_back(rgb_as_map(out, v));
    }
    return bundle;
}

std::vector<Vec3> backproject(const std::vector<std::vector<double>>& depth_maps,
                              const std::vector<Camera>& cameras, int stride) {
    if (depth_maps.size() != cameras.size()) {
        throw validation_error("backproject: depth map and camera counts differ");
    }
    if (stride < 1) throw validation_error("backproject: stride must be at least 1");

    std::vector<Vec3> points;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const Camera& cam = cameras[v];
        const std::vector<double>& depth = depth_maps[v];
        if (depth.size() != static_cast<std::size_t>(cam.width) * cam.height) {
            std::ostringstream msg;
            msg << "backproject: view " << v << " depth size " << depth.size()
                << " does not match camera resolution " << cam.width << "x" << cam.height;
            throw validation_error(msg.str());
        }
        for (int y = 0; y < cam.height; y += stride) {
            for (int x = 0; x < cam.width; x += stride) {
                const double d = depth[static_cast<std::size_t>(y) * cam.width + x];
                if (!std::isfinite(d) || d <= 0.0) continue;
                const Vec3 cam_point{(x - cam.cx) / cam.fx * d,
                                     (y - cam.cy) / cam.fy * d, d};
                points.push_back(cam.to_world(cam_point));
            }
        }
    }
    return points;
}

}  // namespace fsplat
