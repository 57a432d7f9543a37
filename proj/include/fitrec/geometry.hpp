#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fitrec/errors.hpp"

namespace fitrec {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const { return *this / norm(); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// A segmented scan of one component: the unit of classification.
struct PointCloud {
    std::vector<Vec3> points;
    std::string id;
    std::optional<int> label;  // taxonomy index

    std::size_t size() const { return points.size(); }
};

/// Inverse transform of a unit-sphere normalization.
struct NormalizationRecord {
    Vec3 center;    // centroid subtracted from every point
    double radius;  // max distance from centroid before scaling, > 0
};

/// Translate the centroid to the origin and scale so the farthest point has
/// norm 1. Point order is preserved.
/// Throws EmptyCloud / DegenerateCloud (all points coincide).
std::pair<PointCloud, NormalizationRecord> normalize_unit_sphere(const PointCloud& cloud);

/// Invert normalize_unit_sphere via its record.
PointCloud denormalize(const PointCloud& cloud, const NormalizationRecord& rec);

/// Seeded uniform downsample to exactly n points. When the cloud has at least
/// n points the result is a subset without replacement; otherwise every
/// original appears at least once and the remainder is drawn with replacement.
PointCloud downsample_points(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

Vec3 centroid(const PointCloud& cloud);

/// Bounding sphere (centroid center, max-distance radius).
struct BoundingSphere {
    Vec3 center;
    double radius;
};
BoundingSphere bounding_sphere(const PointCloud& cloud);

}  // namespace fitrec
