// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "featsplat/raster.hpp"
#include "featsplat/types.hpp"

namespace fsplat {

struct SceneSpec {
    std::size_t n_gaussians = 20;
    std::size_t n_prototypes = 4;
    int feature_dim = 16;
    Vec3 extent{2.0, 2.0, 2.0};   // half-sizes of the scene box
    int n_views = 8;
    double orbit_radius = 0.0;    // 0 = derive from extent
    double orbit_height = 0.0;    // 0 = derive from extent
    int image_width = 64;
    int image_height = 64;
    std::uint64_t seed = 1;
};

struct SceneBundle {
    GaussianField field;                  // with planted features
    std::vector<Camera> cameras;
    std::vector<FeatureMap> gt_feature_maps;  // rendered from the planted field
    std::vector<FeatureMap> gt_rgb;           // dim-3 maps
    std::vector<double> prototype_table;      // n_prototypes * feature_dim
    std::vector<std::size_t> assignment;      // per-gaussian prototype index
};

// Builds clusters of gaussians around well-separated centers, plants one
// unit-norm prototype feature per cluster, places cameras on an orbit around
// the scene center, and renders the ground-truth maps with the raster module.
// Deterministic per seed.
SceneBundle synth_scene(const SceneSpec& spec);

// Unprojects every stride-th pixel with finite positive depth into a world
// point via the pinhole inverse, concatenated across views.
std::vector<Vec3> backproject(const std::vector<std::vector<double>>& depth_maps,
                              const std::vector<Camera>& cameras, int stride);

// Orbit camera looking at the world origin; +z is up in world space.
Camera make_orbit_camera(double azimuth, double radius, double height, int width,
                         int height_px, double focal, double near_clip, double far_clip);

}  // namespace fsplat
