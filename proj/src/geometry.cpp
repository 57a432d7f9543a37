#include "fitrec/geometry.hpp"

#include <algorithm>

#include "fitrec/rng.hpp"

namespace fitrec {

Vec3 centroid(const PointCloud& cloud) {
    if (cloud.points.empty()) throw EmptyCloud();
    Vec3 sum;
    for (const Vec3& p : cloud.points) sum += p;
    return sum / static_cast<double>(cloud.points.size());
}

BoundingSphere bounding_sphere(const PointCloud& cloud) {
    const Vec3 c = centroid(cloud);
    double r2 = 0.0;
    for (const Vec3& p : cloud.points) r2 = std::max(r2, (p - c).squared_norm());
    return {c, std::sqrt(r2)};
}

std::pair<PointCloud, NormalizationRecord> normalize_unit_sphere(const PointCloud& cloud) {
    if (cloud.points.empty()) throw EmptyCloud();
    const BoundingSphere bs = bounding_sphere(cloud);
    if (bs.radius <= 0.0) throw DegenerateCloud();

    PointCloud out;
    out.id = cloud.id;
    out.label = cloud.label;
    out.points.reserve(cloud.points.size());
    const double inv_r = 1.0 / bs.radius;
    for (const Vec3& p : cloud.points) out.points.push_back((p - bs.center) * inv_r);
    return {std::move(out), NormalizationRecord{bs.center, bs.radius}};
}

PointCloud denormalize(const PointCloud& cloud, const NormalizationRecord& rec) {
    PointCloud out;
    out.id = cloud.id;
    out.label = cloud.label;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(p * rec.radius + rec.center);
    return out;
}

PointCloud downsample_points(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
    if (cloud.points.empty()) throw EmptyCloud();
    const std::size_t m = cloud.points.size();

    PointCloud out;
    out.id = cloud.id;
    out.label = cloud.label;
    out.points.reserve(n);
    Rng rng(seed);

    if (m >= n) {
        // partial Fisher-Yates over indices: first n entries are a uniform
        // subset without replacement
        std::vector<std::uint32_t> idx(m);
        for (std::size_t i = 0; i < m; ++i) idx[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(m - i));
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t i = 0; i < n; ++i) out.points.push_back(cloud.points[idx[i]]);
    } else {
        for (std::size_t i = 0; i < m; ++i) out.points.push_back(cloud.points[i]);
        for (std::size_t i = m; i < n; ++i)
            out.points.push_back(cloud.points[rng.uniform_index(m)]);
    }
    return out;
}

}  // namespace fitrec
