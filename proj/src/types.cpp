// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "featsplat/errors.hpp"

namespace fsplat {

GaussianField::Bounds GaussianField::bbox() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Bounds b{{inf, inf, inf}, {-inf, -inf, -inf}};
    for (const Gaussian& g : gaussians) {
        b.min.x = std::min(b.min.x, g.mean.x);
        b.min.y = std::min(b.min.y, g.mean.y);
        b.min.z = std::min(b.min.z, g.mean.z);
        b.max.x = std::max(b.max.x, g.mean.x);
        b.max.y = std::max(b.max.y, g.mean.y);
        b.max.z = std::max(b.max.z, g.mean.z);
    }
    return b;
}

std::vector<Violation> validate_field(const GaussianField& field) {
    std::vector<Violation> out;
    if (field.feature_dim < 0) {
        out.push_back({Violation::npos, "feature_dim must be non-negative"});
    }
    for (std::size_t i = 0; i < field.gaussians.size(); ++i) {
        const Gaussian& g = field.gaussians[i];
        if (!(g.scale.x > 0.0 && g.scale.y > 0.0 && g.scale.z > 0.0)) {
            out.push_back({i, "scale components must be strictly positive"});
        }
        if (std::abs(g.rotation.norm() - 1.0) > kQuatNormTol) {
            out.push_back({i, "rotation quaternion must have unit norm"});
        }
        if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) {
            out.push_back({i, "opacity must lie in [0, 1]"});
        }
        if (g.feature.size() != static_cast<std::size_t>(field.feature_dim)) {
            std::ostringstream msg;
            msg << "feature dimension " << g.feature.size()
                << " does not match field dimension " << field.feature_dim;
            out.push_back({i, msg.str()});
        }
        for (double v : g.feature) {
            if (!std::isfinite(v)) {
                out.push_back({i, "feature components must be finite"});
                break;
            }
        }
    }
    return out;
}

void require_valid(const GaussianField& field) {
    const std::vector<Violation> violations = validate_field(field);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid gaussian field (" << violations.size() << " violations):";
    const std::size_t shown = std::min<std::size_t>(violations.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
        msg << "\n  [" << violations[i].index << "] " << violations[i].rule;
    }
    if (shown < violations.size()) msg << "\n  ...";
    throw validation_error(msg.str());
}

std::vector<std::string> Camera::validate() const {
    std::vector<std::string> out;
    if (!(fx > 0.0 && fy > 0.0)) out.push_back("fx and fy must be positive");
    if (width < 1 || height < 1) out.push_back("resolution must be at least 1x1");
    if (!(near_clip > 0.0 && near_clip < far_clip)) {
        out.push_back("clip planes must satisfy 0 < near < far");
    }
    const Mat3 rrt = rotation * rotation.transposed();
    double max_dev = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            const double target = (r == c) ? 1.0 : 0.0;
            max_dev = std::max(max_dev, std::abs(rrt.at(r, c) - target));
        }
    }
    if (max_dev > kRotOrthoTol) {
        out.push_back("pose rotation is not orthonormal (max deviation " +
                      std::to_string(max_dev) + ")");
    }
    return out;
}

void require_valid(const Camera& cam) {
    const std::vector<std::string> problems = cam.validate();
    if (problems.empty()) return;
    std::ostringstream msg;
    msg << "invalid camera:";
    for (const std::string& p : problems) msg << "\n  " << p;
    throw validation_error(msg.str());
}

}  // namespace fsplat
