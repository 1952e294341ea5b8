// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cmath>

namespace fsplat {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this / n : Vec3{};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
};

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    static Mat3 diagonal(double a, double b, double c) {
        return {{a, 0, 0, 0, b, 0, 0, 0, c}};
    }

    // Rotation matrix of a unit quaternion.
    static Mat3 from_quat(const Quat& q) {
        const double w = q.w, x = q.x, y = q.y, z = q.z;
        return {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    }

    double at(int r, int c) const { return m[static_cast<std::size_t>(r) * 3 + c]; }
    double& at(int r, int c) { return m[static_cast<std::size_t>(r) * 3 + c]; }

    Mat3 transposed() const {
        return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r{{0, 0, 0, 0, 0, 0, 0, 0, 0}};
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j)
                    r.at(i, j) += at(i, k) * o.at(k, j);
        return r;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
};

// Symmetric 2x2 matrix [[a, b], [b, c]].
struct Sym2 {
    double a = 0.0, b = 0.0, c = 0.0;

    double det() const { return a * c - b * b; }
    double trace() const { return a + c; }

    double eigen_max() const {
        const double h = 0.5 * (a - c);
        return 0.5 * (a + c) + std::sqrt(h * h + b * b);
    }
    double eigen_min() const {
        const double h = 0.5 * (a - c);
        return 0.5 * (a + c) - std::sqrt(h * h + b * b);
    }

    Sym2 inverse() const {
        const double d = det();
        return {c / d, -b / d, a / d};
    }
};

}  // namespace fsplat
