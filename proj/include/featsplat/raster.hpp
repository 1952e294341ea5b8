// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "featsplat/types.hpp"

namespace fsplat {

// H x W x D grid of feature vectors, row-major.
struct FeatureMap {
    int width = 0, height = 0, dim = 0;
    int frame_id = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int w, int h, int d, int frame = 0)
        : width(w), height(h), dim(d), frame_id(frame),
          data(static_cast<std::size_t>(w) * h * d, 0.0) {}

    std::span<double> at(int x, int y) {
        return {data.data() + (static_cast<std::size_t>(y) * width + x) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> at(int x, int y) const {
        return {data.data() + (static_cast<std::size_t>(y) * width + x) * dim,
                static_cast<std::size_t>(dim)};
    }
};

enum class Precision { f32, f64 };

// Weight convention for responsibilities: the renderer's transmittance-
// inclusive compositing weights, or the plain opacity-times-density mixture.
enum class RespMode { compositing, mixture };

struct RenderOptions {
    std::optional<int> width;   // override camera resolution
    std::optional<int> height;
    Precision precision = Precision::f64;
    RespMode responsibility_mode = RespMode::compositing;
};

struct RenderOutput {
    int width = 0, height = 0;
    std::vector<double> rgb;    // h*w*3, in [0,1]
    FeatureMap features;
    std::vector<double> alpha;  // h*w, accumulated opacity
    std::vector<double> depth;  // h*w, expected depth, 0 where alpha == 0
};

// Per-pixel normalized gaussian contributions, CSR over pixels.
struct ResponsibilityMap {
    int frame_id = 0;
    int width = 0, height = 0;
    std::vector<std::uint32_t> offsets;  // h*w + 1
    std::vector<std::uint32_t> indices;  // gaussian indices
    std::vector<double> weights;         // normalized, sum to 1 per covered pixel
    std::vector<double> coverage;        // h*w, total weight before normalization

    std::size_t entry_count(int x, int y) const {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        return offsets[p + 1] - offsets[p];
    }
};

// Accumulated weight below which a pixel counts as uncovered.
inline constexpr double kCoverageEps = 1e-4;

// Per-splat alpha clamp and contribution cutoff (standard splatting practice).
inline constexpr double kAlphaClamp = 0.999;
inline constexpr double kWeightCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceMin = 1e-4;
inline constexpr int kTileSize = 16;

// Tile-based front-to-back compositing of rgb, features, alpha and depth.
// Parallelizes over tiles; bit-identical across thread counts.
RenderOutput render(const GaussianField& field, const Camera& cam,
                    const RenderOptions& opts = {});

// Reference renderer: per-pixel loop over every projected gaussian in full
// depth order, single-threaded, double precision. Identical contract to
// render(); kept as the oracle the tiled path is tested against.
RenderOutput render_brute_force(const GaussianField& field, const Camera& cam,
                                const RenderOptions& opts = {});

// Normalized per-pixel contributions R_i(t, x). Pixels whose accumulated
// weight is <= kCoverageEps carry no entries.
ResponsibilityMap responsibilities(const GaussianField& field, const Camera& cam,
                                   const RenderOptions& opts = {});

}  // namespace fsplat
