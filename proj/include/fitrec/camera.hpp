#pragma once

#include <cmath>

#include "fitrec/geometry.hpp"

namespace fitrec {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

/// Virtual camera on the unit sphere, looking at the origin.
/// position = (cos(theta)cos(phi), cos(theta)sin(phi), sin(theta)) with
/// elevation theta in [-90, 90] degrees and azimuth phi in [0, 360).
struct CameraPose {
    double elevation_deg = 0.0;
    double azimuth_deg = 0.0;

    Vec3 position() const {
        const double t = elevation_deg * kDegToRad;
        const double p = azimuth_deg * kDegToRad;
        return {std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), std::sin(t)};
    }

    Vec3 forward() const { return position() * -1.0; }

    /// Pose looking at the origin from a (nonzero) direction.
    static CameraPose from_direction(const Vec3& dir) {
        const Vec3 u = dir.normalized();
        CameraPose pose;
        pose.elevation_deg = std::asin(std::clamp(u.z, -1.0, 1.0)) * kRadToDeg;
        pose.azimuth_deg = std::atan2(u.y, u.x) * kRadToDeg;
        if (pose.azimuth_deg < 0.0) pose.azimuth_deg += 360.0;
        if (pose.azimuth_deg >= 360.0) pose.azimuth_deg = 0.0;
        return pose;
    }
};

}  // namespace fitrec
