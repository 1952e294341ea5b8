// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "featsplat/errors.hpp"
#include "featsplat/project.hpp"

namespace fsplat {
namespace {

struct PreparedSplat {
    double mx, my;          // mean2d
    double ia, ib, ic;      // inverse 2D covariance
    double alpha;
    double depth;
    double qmax;            // support boundary: alpha*G >= 1/255 iff q <= qmax
    double pdf_norm;        // 1 / (2*pi*sqrt(det cov2d)), mixture mode
    double bin_radius;      // conservative euclidean support radius
    double r, g, b;
    const double* feature;  // row into the field's feature storage
    std::uint32_t source;
};

Camera effective_camera(const Camera& cam, const RenderOptions& opts) {
    Camera out = cam;
    if (opts.width) out.width = *opts.width;
    if (opts.height) out.height = *opts.height;
    if (out.width < 1 || out.height < 1) {
        throw validation_error("render: resolution override must be at least 1x1");
    }
    return out;
}

std::vector<PreparedSplat> prepare_splats(const GaussianField& field, const Camera& cam) {
    const std::size_t n = field.size();
    std::vector<std::optional<Splat2D>> projected(n);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        projected[i] = project(field.gaussians[i], cam);
    }

    std::vector<PreparedSplat> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!projected[i]) continue;
        const Splat2D& s = *projected[i];
        const Gaussian& g = field.gaussians[i];
        PreparedSplat p;
        p.mx = s.mean2d.x;
        p.my = s.mean2d.y;
        const Sym2 inv = s.cov2d.inverse();
        p.ia = inv.a;
        p.ib = inv.b;
        p.ic = inv.c;
        p.alpha = g.opacity;
        p.depth = s.depth;
        p.qmax = 2.0 * std::log(255.0 * g.opacity);  // -inf for alpha == 0
        p.pdf_norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(s.cov2d.det()));
        p.bin_radius = p.qmax > 0.0
                           ? std::sqrt(p.qmax * s.cov2d.eigen_max()) + 1e-9
                           : 0.0;
        p.r = g.color.x;
        p.g = g.color.y;
        p.b = g.color.z;
        p.feature = g.feature.data();
        p.source = static_cast<std::uint32_t>(i);
        out.push_back(p);
    }
    return out;
}

bool depth_before(const PreparedSplat& a, const PreparedSplat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source < b.source;
}

// Front-to-back compositing at one pixel over splats given in depth order.
// Both the tiled and the brute-force path run exactly this loop, so the two
// renderers differ only in which splats they are handed.
template <typename T, typename EmitWeight>
void composite_pixel(const PreparedSplat* splats, const std::uint32_t* order,
                     std::size_t count, double px, double py, int dim,
                     T* rgb_acc, T* feat_acc, T& alpha_acc, T& depth_acc,
                     EmitWeight&& emit) {
    T transmittance = T(1);
    for (std::size_t k = 0; k < count; ++k) {
        const PreparedSplat& s = splats[order[k]];
        const T dx = T(px) - T(s.mx);
        const T dy = T(py) - T(s.my);
        const T q = T(s.ia) * dx * dx + T(2) * T(s.ib) * dx * dy + T(s.ic) * dy * dy;
        if (!(q <= T(s.qmax))) continue;
        const T gauss = std::exp(T(-0.5) * q);
        const T a = std::min(T(kAlphaClamp), T(s.alpha) * gauss);
        if (a < T(kWeightCutoff)) continue;
        const T w = a * transmittance;
        rgb_acc[0] += w * T(s.r);
        rgb_acc[1] += w * T(s.g);
        rgb_acc[2] += w * T(s.b);
        for (int d = 0; d < dim; ++d) feat_acc[d] += w * T(s.feature[d]);
        alpha_acc += w;
        depth_acc += w * T(s.depth);
        emit(order[k], static_cast<double>(w));
        transmittance *= T(1) - a;
        if (transmittance < T(kTransmittanceMin)) break;
    }
}

struct NoEmit {
    void operator()(std::uint32_t, double) const {}
};

struct TileGrid {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> lists;
};

TileGrid build_tiles(const std::vector<PreparedSplat>& splats, int width, int height) {
    TileGrid grid;
    grid.tiles_x = (width + kTileSize - 1) / kTileSize;
    grid.tiles_y = (height + kTileSize - 1) / kTileSize;
    grid.lists.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);

    for (std::uint32_t i = 0; i < splats.size(); ++i) {
        const PreparedSplat& s = splats[i];
        if (s.bin_radius <= 0.0) continue;
        const int px0 = std::max(0, static_cast<int>(std::ceil(s.mx - s.bin_radius)));
        const int px1 = std::min(width - 1, static_cast<int>(std::floor(s.mx + s.bin_radius)));
        const int py0 = std::max(0, static_cast<int>(std::ceil(s.my - s.bin_radius)));
        const int py1 = std::min(height - 1, static_cast<int>(std::floor(s.my + s.bin_radius)));
        if (px0 > px1 || py0 > py1) continue;
        for (int ty = py0 / kTileSize; ty <= py1 / kTileSize; ++ty) {
            for (int tx = px0 / kTileSize; tx <= px1 / kTileSize; ++tx) {
                grid.lists[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(i);
            }
        }
    }

    for (std::vector<std::uint32_t>& list : grid.lists) {
        std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
            return depth_before(splats[a], splats[b]);
        });
    }
    return grid;
}

RenderOutput make_output(int width, int height, int dim) {
    RenderOutput out;
    out.width = width;
    out.height = height;
    out.rgb.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
    out.features = FeatureMap(width, height, dim);
    out.alpha.assign(static_cast<std::size_t>(width) * height, 0.0);
    out.depth.assign(static_cast<std::size_t>(width) * height, 0.0);
    return out;
}

template <typename T>
void render_tiled_impl(const std::vector<PreparedSplat>& splats, const TileGrid& grid,
                       int dim, RenderOutput& out) {
    const int width = out.width, height = out.height;
    const std::int64_t n_tiles = static_cast<std::int64_t>(grid.lists.size());

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t t = 0; t < n_tiles; ++t) {
        const std::vector<std::uint32_t>& list = grid.lists[static_cast<std::size_t>(t)];
        const int tx = static_cast<int>(t % grid.tiles_x);
        const int ty = static_cast<int>(t / grid.tiles_x);
        const int x0 = tx * kTileSize, x1 = std::min(width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(height, y0 + kTileSize);

        std::vector<T> feat(static_cast<std::size_t>(dim));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                T rgb[3] = {T(0), T(0), T(0)};
                std::fill(feat.begin(), feat.end(), T(0));
                T alpha = T(0), depth = T(0);
                composite_pixel<T>(splats.data(), list.data(), list.size(),
                                   static_cast<double>(x), static_cast<double>(y), dim,
                                   rgb, feat.data(), alpha, depth, NoEmit{});
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                out.rgb[p * 3 + 0] = static_cast<double>(rgb[0]);
                out.rgb[p * 3 + 1] = static_cast<double>(rgb[1]);
                out.rgb[p * 3 + 2] = static_cast<double>(rgb[2]);
                for (int d = 0; d < dim; ++d) {
                    out.features.data[p * dim + d] = static_cast<double>(feat[d]);
                }
                out.alpha[p] = static_cast<double>(alpha);
                out.depth[p] = alpha == T(0) ? 0.0
                                             : static_cast<double>(depth) / static_cast<double>(alpha);
            }
        }
    }
}

void check_renderable(const GaussianField& field, const Camera& cam) {
    require_valid(field);
    require_valid(cam);
    if (field.size() == 0) {
        throw validation_error("render: field must contain at least one gaussian");
    }
}

}  // namespace

RenderOutput render(const GaussianField& field, const Camera& cam,
                    const RenderOptions& opts) {
    check_renderable(field, cam);
    const Camera ecam = effective_camera(cam, opts);
    const std::vector<PreparedSplat> splats = prepare_splats(field, ecam);
    const TileGrid grid = build_tiles(splats, ecam.width, ecam.height);
    RenderOutput out = make_output(ecam.width, ecam.height, field.feature_dim);
    if (opts.precision == Precision::f64) {
        render_tiled_impl<double>(splats, grid, field.feature_dim, out);
    } else {
        render_tiled_impl<float>(splats, grid, field.feature_dim, out);
    }
    return out;
}

RenderOutput render_brute_force(const GaussianField& field, const Camera& cam,
                                const RenderOptions& opts) {
    check_renderable(field, cam);
    const Camera ecam = effective_camera(cam, opts);
    const std::vector<PreparedSplat> splats = prepare_splats(field, ecam);

    std::vector<std::uint32_t> order(splats.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return depth_before(splats[a], splats[b]);
    });

    const int dim = field.feature_dim;
    RenderOutput out = make_output(ecam.width, ecam.height, dim);
    std::vector<double> feat(static_cast<std::size_t>(dim));
    for (int y = 0; y < ecam.height; ++y) {
        for (int x = 0; x < ecam.width; ++x) {
            double rgb[3] = {0.0, 0.0, 0.0};
            std::fill(feat.begin(), feat.end(), 0.0);
            double alpha = 0.0, depth = 0.0;
            composite_pixel<double>(splats.data(), order.data(), order.size(),
                                    static_cast<double>(x), static_cast<double>(y), dim,
                                    rgb, feat.data(), alpha, depth, NoEmit{});
            const std::size_t p = static_cast<std::size_t>(y) * ecam.width + x;
            out.rgb[p * 3 + 0] = rgb[0];
            out.rgb[p * 3 + 1] = rgb[1];
            out.rgb[p * 3 + 2] = rgb[2];
            for (int d = 0; d < dim; ++d) out.features.data[p * dim + d] = feat[d];
            out.alpha[p] = alpha;
            out.depth[p] = alpha == 0.0 ? 0.0 : depth / alpha;
        }
    }
    return out;
}

ResponsibilityMap responsibilities(const GaussianField& field, const Camera& cam,
                                   const RenderOptions& opts) {
    check_renderable(field, cam);
    const Camera ecam = effective_camera(cam, opts);
    const std::vector<PreparedSplat> splats = prepare_splats(field, ecam);
    const TileGrid grid = build_tiles(splats, ecam.width, ecam.height);

    const int width = ecam.width, height = ecam.height;
    const std::size_t n_pixels = static_cast<std::size_t>(width) * height;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> entries(n_pixels);
    std::vector<double> coverage(n_pixels, 0.0);

    const bool mixture = opts.responsibility_mode == RespMode::mixture;
    const std::int64_t n_tiles = static_cast<std::int64_t>(grid.lists.size());

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t t = 0; t < n_tiles; ++t) {
        const std::vector<std::uint32_t>& list = grid.lists[static_cast<std::size_t>(t)];
        const int tx = static_cast<int>(t % grid.tiles_x);
        const int ty = static_cast<int>(t / grid.tiles_x);
        const int x0 = tx * kTileSize, x1 = std::min(width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(height, y0 + kTileSize);

        std::vector<double> feat_scratch(static_cast<std::size_t>(field.feature_dim));
        std::vector<std::pair<std::uint32_t, double>> pixel_entries;

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                pixel_entries.clear();
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                if (mixture) {
                    // Opacity-weighted gaussian densities, no transmittance.
                    for (std::size_t k = 0; k < list.size(); ++k) {
                        const PreparedSplat& s = splats[list[k]];
                        const double dx = x - s.mx;
                        const double dy = y - s.my;
                        const double q = s.ia * dx * dx + 2.0 * s.ib * dx * dy + s.ic * dy * dy;
                        if (!(q <= s.qmax)) continue;
                        const double gauss = std::exp(-0.5 * q);
                        if (std::min(kAlphaClamp, s.alpha * gauss) < kWeightCutoff) continue;
                        pixel_entries.emplace_back(list[k], s.alpha * gauss * s.pdf_norm);
                    }
                } else {
                    double rgb[3] = {0, 0, 0};
                    std::fill(feat_scratch.begin(), feat_scratch.end(), 0.0);
                    double alpha = 0.0, depth = 0.0;
                    composite_pixel<double>(
                        splats.data(), list.data(), list.size(),
                        static_cast<double>(x), static_cast<double>(y), field.feature_dim,
                        rgb, feat_scratch.data(), alpha, depth,
                        [&](std::uint32_t idx, double w) { pixel_entries.emplace_back(idx, w); });
                }
                double total = 0.0;
                for (const auto& [idx, w] : pixel_entries) total += w;
                coverage[p] = total;
                if (total <= kCoverageEps) continue;
                std::vector<std::pair<std::uint32_t, double>>& dst = entries[p];
                dst.reserve(pixel_entries.size());
                for (const auto& [idx, w] : pixel_entries) {
                    dst.emplace_back(splats[idx].source, w / total);
                }
            }
        }
    }

    ResponsibilityMap out;
    out.width = width;
    out.height = height;
    out.coverage = std::move(coverage);
    out.offsets.resize(n_pixels + 1, 0);
    std::size_t total_entries = 0;
    for (std::size_t p = 0; p < n_pixels; ++p) {
        total_entries += entries[p].size();
        out.offsets[p + 1] = static_cast<std::uint32_t>(total_entries);
    }
    out.indices.reserve(total_entries);
    out.weights.reserve(total_entries);
    for (std::size_t p = 0; p < n_pixels; ++p) {
        for (const auto& [idx, w] : entries[p]) {
            out.indices.push_back(idx);
            out.weights.push_back(w);
        }
    }
    return out;
}

}  // namespace fsplat
