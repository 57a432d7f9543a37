#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fitrec/camera.hpp"
#include "fitrec/geometry.hpp"
#include "fitrec/renderer.hpp"

namespace fitrec {

/// Plane {p : n.p = d} with unit normal, plus the indices of its inliers.
struct Plane {
    Vec3 normal;
    double offset = 0.0;
    std::vector<int> inliers;

    double distance(const Vec3& p) const { return std::abs(normal.dot(p) - offset); }
};

struct RansacConfig {
    double inlier_threshold = 0.02;  // unitless, post-normalization
    int iterations = 500;
    std::uint64_t seed = 0;
};

struct NeighborhoodConfig {
    double step_deg = 10.0;  // 10 or 40 in the experiment grid
};

/// The 12-camera ring: elevation 30 degrees, azimuth 0,30,...,330.
std::vector<CameraPose> ring_cameras();

/// Best plane by inlier count (ties by smallest sum of squared inlier
/// distances), least-squares refit over the winning inliers, inlier list
/// recomputed against the refit plane. Deterministic per seed.
/// Throws TooFewPoints (< 3) / DegenerateGeometry (collinear input).
Plane fit_plane_ransac(const PointCloud& cloud, const RansacConfig& cfg);

/// The two antipodal camera positions +-n on the unit sphere.
std::pair<CameraPose, CameraPose> candidate_views_from_plane(const Plane& plane);

/// The 20 vertices of a regular dodecahedron, normalized to the unit sphere.
std::vector<CameraPose> dodecahedron_candidates();

/// Render every candidate and keep the one with the highest acquisition
/// rate; ties go to the lowest candidate index.
CameraPose select_view_by_acquisition_rate(const PointCloud& cloud,
                                           const std::vector<CameraPose>& candidates,
                                           const RenderConfig& render_cfg);

/// Center plus 12 offsets (+-d,0), (+-2d,0), (0,+-d), (0,+-2d), (+-d,+d),
/// (+-d,-d) in (elevation, azimuth); elevation clamped to [-89, 89], azimuth
/// wrapped mod 360, collisions after clamping nudged by +0.5 deg in azimuth.
/// Always 13 poses, center first.
std::vector<CameraPose> expand_view_neighborhood(const CameraPose& center,
                                                 const NeighborhoodConfig& cfg);

}  // namespace fitrec
