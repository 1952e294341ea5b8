// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include <cmath>
#include <cstring>

#include <omp.h>

#include "doctest.h"
#include "featsplat/errors.hpp"
#include "featsplat/project.hpp"
#include "featsplat/raster.hpp"
#include "test_helpers.hpp"

using namespace fsplat;
using namespace fsplat::test;

namespace {

// 17x17 image with the principal point on pixel (8,8).
Camera center_camera() { return axis_camera(17, 17, 100.0, 8.0, 8.0); }

double max_abs_diff(const RenderOutput& a, const RenderOutput& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        m = std::max(m, std::abs(a.rgb[i] - b.rgb[i]));
    }
    for (std::size_t i = 0; i < a.features.data.size(); ++i) {
        m = std::max(m, std::abs(a.features.data[i] - b.features.data[i]));
    }
    return m;
}

}  // namespace

TEST_CASE("render: single opaque gaussian composites 0.999 of its feature") {
    GaussianField field;
    field.feature_dim = 4;
    field.gaussians.push_back(
        make_gaussian({0, 0, 2}, 0.02, 0.999, {1.0, 0.25, -0.5, 2.0}));
    const Camera cam = center_camera();
    const RenderOutput out = render(field, cam);

    const auto feat = out.features.at(8, 8);
    CHECK(feat[0] == doctest::Approx(0.999).epsilon(1e-12));
    CHECK(feat[1] == doctest::Approx(0.999 * 0.25).epsilon(1e-12));
    CHECK(feat[2] == doctest::Approx(0.999 * -0.5).epsilon(1e-12));
    CHECK(feat[3] == doctest::Approx(0.999 * 2.0).epsilon(1e-12));
    CHECK(out.alpha[8 * 17 + 8] == doctest::Approx(0.999).epsilon(1e-12));
    CHECK(out.depth[8 * 17 + 8] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("render: uncovered pixels are exactly zero") {
    GaussianField field;
    field.feature_dim = 2;
    field.gaussians.push_back(make_gaussian({0, 0, 2}, 0.02, 0.999, {1.0, 1.0}));
    const RenderOutput out = render(field, center_camera());
    // The corner pixel is far outside the support footprint.
    CHECK(out.alpha[0] == 0.0);
    CHECK(out.rgb[0] == 0.0);
    CHECK(out.features.at(0, 0)[0] == 0.0);
    CHECK(out.depth[0] == 0.0);
}

TEST_CASE("render: two-gaussian compositing recursion, hand-evaluated") {
    // Both gaussians are dead-center on pixel (8,8) so G = 1 exactly;
    // weights are 0.5 and 0.5*(1-0.5) = 0.25.
    GaussianField field;
    field.feature_dim = 2;
    field.gaussians.push_back(make_gaussian({0, 0, 2}, 0.02, 0.5, {1.0, 0.0}));
    field.gaussians.push_back(make_gaussian({0, 0, 4}, 0.04, 0.5, {0.0, 1.0}));
    const RenderOutput out = render(field, center_camera());

    const auto feat = out.features.at(8, 8);
    CHECK(feat[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(feat[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.alpha[8 * 17 + 8] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("responsibilities: single gaussian owns its pixel") {
    GaussianField field;
    field.feature_dim = 2;
    field.gaussians.push_back(make_gaussian({0, 0, 2}, 0.02, 0.999, {1.0, 1.0}));
    const ResponsibilityMap resp = responsibilities(field, center_camera());
    const std::size_t p = 8 * 17 + 8;
    REQUIRE(resp.offsets[p + 1] - resp.offsets[p] == 1);
    CHECK(resp.indices[resp.offsets[p]] == 0);
    CHECK(resp.weights[resp.offsets[p]] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(resp.coverage[p] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("responsibilities: two-gaussian example normalizes to 2/3 and 1/3") {
    GaussianField field;
    field.feature_dim = 2;
    field.gaussians.push_back(make_gaussian({0, 0, 2}, 0.02, 0.5, {1.0, 0.0}));
    field.gaussians.push_back(make_gaussian({0, 0, 4}, 0.04, 0.5, {0.0, 1.0}));
    const ResponsibilityMap resp = responsibilities(field, center_camera());
    const std::size_t p = 8 * 17 + 8;
    REQUIRE(resp.offsets[p + 1] - resp.offsets[p] == 2);
    CHECK(resp.weights[resp.offsets[p]] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(resp.weights[resp.offsets[p] + 1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("responsibilities: uncovered pixels carry no entries") {
    GaussianField field;
    field.feature_dim = 2;
    field.gaussians.push_back(make_gaussian({0, 0, 2}, 0.02, 0.999, {1.0, 1.0}));
    const ResponsibilityMap resp = responsibilities(field, center_camera());
    CHECK(resp.offsets[1] - resp.offsets[0] == 0);  // corner pixel
    CHECK(resp.coverage[0] == 0.0);
}

TEST_CASE("responsibilities: per-pixel sums are 1 wherever covered") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const GaussianField field = random_field(80, 8, seed);
        for (const RespMode mode : {RespMode::compositing, RespMode::mixture}) {
            RenderOptions opts;
            opts.responsibility_mode = mode;
            const Camera cam = looking_at_origin(0.9 * static_cast<double>(seed), 4.0,
                                                 1.2, 48, 48, 60.0);
            const ResponsibilityMap resp = responsibilities(field, cam, opts);
            const std::size_t n_pixels =
                static_cast<std::size_t>(resp.width) * resp.height;
            for (std::size_t p = 0; p < n_pixels; ++p) {
                if (resp.coverage[p] <= kCoverageEps) {
                    REQUIRE(resp.offsets[p + 1] == resp.offsets[p]);
                    continue;
                }
                double sum = 0.0;
                for (std::uint32_t e = resp.offsets[p]; e < resp.offsets[p + 1]; ++e) {
                    REQUIRE(resp.weights[e] > 0.0);
                    REQUIRE(resp.weights[e] <= 1.0);
                    sum += resp.weights[e];
                }
                REQUIRE(std::abs(sum - 1.0) < 1e-6);
            }
        }
    }
}

TEST_CASE("render matches render_brute_force on random fields") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const GaussianField field = random_field(50 + seed * 20, 16, seed);
        const Camera cam =
            looking_at_origin(0.5 * static_cast<double>(seed), 3.5, 1.0, 32, 32, 40.0);
        const RenderOutput tiled = render(field, cam);
        const RenderOutput brute = render_brute_force(field, cam);
        REQUIRE(max_abs_diff(tiled, brute) < 1e-5);
    }
}

TEST_CASE("shared weights: rgb replaced by feature channels is bit-identical") {
    GaussianField field = random_field(60, 8, 21);
    for (Gaussian& g : field.gaussians) {
        g.color = {g.feature[0], g.feature[1], g.feature[2]};
    }
    const Camera cam = looking_at_origin(0.3, 3.5, 0.8, 40, 40, 50.0);
    const RenderOutput out = render(field, cam);
    const std::size_t n_pixels = static_cast<std::size_t>(out.width) * out.height;
    for (std::size_t p = 0; p < n_pixels; ++p) {
        for (int c = 0; c < 3; ++c) {
            REQUIRE(out.rgb[p * 3 + c] ==
                    out.features.data[p * static_cast<std::size_t>(out.features.dim) + c]);
        }
    }
}

TEST_CASE("monotone occlusion: raising front opacity never raises other R") {
    const Camera cam = looking_at_origin(0.4, 3.5, 1.0, 32, 32, 40.0);
    GaussianField field = random_field(40, 4, 17, 0.08, 0.25);
    const ResponsibilityMap before = responsibilities(field, cam);

    // Pick the busiest pixel and find its front-most contributor.
    std::size_t busiest = 0, best_count = 0;
    const std::size_t n_pixels = static_cast<std::size_t>(before.width) * before.height;
    for (std::size_t p = 0; p < n_pixels; ++p) {
        const std::size_t count = before.offsets[p + 1] - before.offsets[p];
        if (count > best_count) {
            best_count = count;
            busiest = p;
        }
    }
    REQUIRE(best_count >= 2);

    std::size_t front = 0;
    double front_depth = 1e300;
    for (std::uint32_t e = before.offsets[busiest]; e < before.offsets[busiest + 1]; ++e) {
        const auto splat = project(field.gaussians[before.indices[e]], cam);
        REQUIRE(splat.has_value());
        if (splat->depth < front_depth) {
            front_depth = splat->depth;
            front = before.indices[e];
        }
    }

    field.gaussians[front].opacity = std::min(1.0, field.gaussians[front].opacity + 0.3);
    const ResponsibilityMap after = responsibilities(field, cam);

    for (std::uint32_t e = before.offsets[busiest]; e < before.offsets[busiest + 1]; ++e) {
        const std::uint32_t idx = before.indices[e];
        if (idx == front) continue;
        double r_after = 0.0;
        for (std::uint32_t e2 = after.offsets[busiest]; e2 < after.offsets[busiest + 1];
             ++e2) {
            if (after.indices[e2] == idx) r_after = after.weights[e2];
        }
        REQUIRE(r_after <= before.weights[e] + 1e-12);
    }
}

TEST_CASE("render: f32 accumulation stays close to f64") {
    const GaussianField field = random_field(60, 8, 31);
    const Camera cam = looking_at_origin(1.1, 3.5, 1.0, 32, 32, 40.0);
    RenderOptions f32_opts;
    f32_opts.precision = Precision::f32;
    const RenderOutput lo = render(field, cam, f32_opts);
    const RenderOutput hi = render(field, cam);
    CHECK(max_abs_diff(lo, hi) < 1e-3);
}

TEST_CASE("render: bit-identical across thread counts") {
    const GaussianField field = random_field(100, 8, 13);
    const Camera cam = looking_at_origin(0.2, 3.5, 1.0, 48, 48, 60.0);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const RenderOutput serial = render(field, cam);
    omp_set_num_threads(4);
    const RenderOutput parallel = render(field, cam);
    omp_set_num_threads(saved);
    REQUIRE(serial.rgb == parallel.rgb);
    REQUIRE(serial.features.data == parallel.features.data);
    REQUIRE(serial.alpha == parallel.alpha);
    REQUIRE(serial.depth == parallel.depth);
}

TEST_CASE("render: resolution override and validation errors") {
    GaussianField field = random_field(5, 4, 2);
    const Camera cam = looking_at_origin(0.0, 3.5, 1.0, 32, 32, 40.0);
    RenderOptions opts;
    opts.width = 16;
    opts.height = 8;
    const RenderOutput out = render(field, cam, opts);
    CHECK(out.width == 16);
    CHECK(out.height == 8);

    GaussianField empty;
    empty.feature_dim = 4;
    CHECK_THROWS_AS(render(empty, cam), validation_error);

    field.gaussians[0].opacity = 2.0;
    CHECK_THROWS_AS(render(field, cam), validation_error);
}
