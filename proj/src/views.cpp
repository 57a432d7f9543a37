#include "fitrec/views.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fitrec/rng.hpp"

namespace fitrec {

namespace {

struct Sym3 {
    // symmetric 3x3, row-major upper triangle mirrored
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
};

// Cyclic Jacobi for a symmetric 3x3; returns eigenvalues ascending and the
// matching unit eigenvectors as columns of v.
void eig_sym3(Sym3 a, std::array<double, 3>& evals, std::array<Vec3, 3>& evecs) {
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = std::abs(a.m[0][1]) + std::abs(a.m[0][2]) + std::abs(a.m[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a.m[p][q]) < 1e-300) continue;
                const double theta = (a.m[q][q] - a.m[p][p]) / (2.0 * a.m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a.m[k][p], akq = a.m[k][q];
                    a.m[k][p] = c * akp - s * akq;
                    a.m[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a.m[p][k], aqk = a.m[q][k];
                    a.m[p][k] = c * apk - s * aqk;
                    a.m[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a.m[i][i] < a.m[j][j]; });
    for (int i = 0; i < 3; ++i) {
        evals[i] = a.m[order[i]][order[i]];
        evecs[i] = Vec3{v[0][order[i]], v[1][order[i]], v[2][order[i]]}.normalized();
    }
}

Sym3 covariance(const std::vector<Vec3>& pts, const std::vector<int>& idx, Vec3& mean_out) {
    Vec3 mean;
    for (int i : idx) mean += pts[i];
    mean = mean / static_cast<double>(idx.size());
    Sym3 cov;
    for (int i : idx) {
        const Vec3 d = pts[i] - mean;
        cov.m[0][0] += d.x * d.x;
        cov.m[0][1] += d.x * d.y;
        cov.m[0][2] += d.x * d.z;
        cov.m[1][1] += d.y * d.y;
        cov.m[1][2] += d.y * d.z;
        cov.m[2][2] += d.z * d.z;
    }
    cov.m[1][0] = cov.m[0][1];
    cov.m[2][0] = cov.m[0][2];
    cov.m[2][1] = cov.m[1][2];
    mean_out = mean;
    return cov;
}

}  // namespace

std::vector<CameraPose> ring_cameras() {
    std::vector<CameraPose> poses;
    poses.reserve(12);
    for (int i = 0; i < 12; ++i) poses.push_back({30.0, 30.0 * i});
    return poses;
}

Plane fit_plane_ransac(const PointCloud& cloud, const RansacConfig& cfg) {
    const auto& pts = cloud.points;
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw TooFewPoints();
    if (cfg.iterations < 1 || cfg.inlier_threshold <= 0.0)
        throw Error("invalid RANSAC config");

    {
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        Vec3 mean;
        Sym3 cov = covariance(pts, all, mean);
        std::array<double, 3> evals;
        std::array<Vec3, 3> evecs;
        eig_sym3(cov, evals, evecs);
        // rank <= 1 means every point sits on one line
        if (evals[1] <= 1e-9 * std::max(evals[2], 1e-300)) throw DegenerateGeometry();
    }

    Rng rng(cfg.seed);
    const double tau = cfg.inlier_threshold;
    int best_count = -1;
    double best_sse = std::numeric_limits<double>::infinity();
    Vec3 best_n;
    double best_d = 0.0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const int i0 = static_cast<int>(rng.uniform_index(n));
        const int i1 = static_cast<int>(rng.uniform_index(n));
        const int i2 = static_cast<int>(rng.uniform_index(n));
        if (i0 == i1 || i0 == i2 || i1 == i2) continue;
        Vec3 nn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
        const double len = nn.norm();
        if (len < 1e-12) continue;  // degenerate triple
        nn = nn / len;
        const double d = nn.dot(pts[i0]);

        int count = 0;
        for (const Vec3& p : pts)
            if (std::abs(nn.dot(p) - d) <= tau) ++count;
        if (count < best_count) continue;

        double sse = 0.0;
        for (const Vec3& p : pts) {
            const double e = nn.dot(p) - d;
            if (std::abs(e) <= tau) sse += e * e;
        }
        if (count > best_count || (count == best_count && sse < best_sse)) {
            best_count = count;
            best_sse = sse;
            best_n = nn;
            best_d = d;
        }
    }
    if (best_count < 3) throw DegenerateGeometry("RANSAC found no plane support");

    // least-squares refit over the winning candidate's inliers
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i)
        if (std::abs(best_n.dot(pts[i]) - best_d) <= tau) inliers.push_back(i);

    Vec3 mean;
    Sym3 cov = covariance(pts, inliers, mean);
    std::array<double, 3> evals;
    std::array<Vec3, 3> evecs;
    eig_sym3(cov, evals, evecs);
    Vec3 fit_n = evecs[0];
    if (fit_n.dot(best_n) < 0.0) fit_n = fit_n * -1.0;  // keep candidate orientation

    Plane plane;
    plane.normal = fit_n;
    plane.offset = fit_n.dot(mean);
    for (int i = 0; i < n; ++i)
        if (plane.distance(pts[i]) <= tau) plane.inliers.push_back(i);
    return plane;
}

std::pair<CameraPose, CameraPose> candidate_views_from_plane(const Plane& plane) {
    return {CameraPose::from_direction(plane.normal),
            CameraPose::from_direction(plane.normal * -1.0)};
}

std::vector<CameraPose> dodecahedron_candidates() {
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    const double ig = 1.0 / g;
    std::vector<Vec3> verts;
    verts.reserve(20);
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            for (double sz : {-1.0, 1.0}) verts.push_back({sx, sy, sz});
    for (double a : {-ig, ig})
        for (double b : {-g, g}) {
            verts.push_back({0, a, b});
            verts.push_back({a, b, 0});
            verts.push_back({b, 0, a});
        }

    std::vector<CameraPose> poses;
    poses.reserve(20);
    for (const Vec3& v : verts) poses.push_back(CameraPose::from_direction(v));
    return poses;
}

CameraPose select_view_by_acquisition_rate(const PointCloud& cloud,
                                           const std::vector<CameraPose>& candidates,
                                           const RenderConfig& render_cfg) {
    if (candidates.empty()) throw Error("no view candidates");
    double best_rate = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const DepthImage img = render_depth_image(cloud, candidates[i], render_cfg);
        const double rate = compute_acquisition_rate(img, cloud.points.size());
        if (rate > best_rate) {
            best_rate = rate;
            best_idx = i;
        }
    }
    return candidates[best_idx];
}

std::vector<CameraPose> expand_view_neighborhood(const CameraPose& center,
                                                 const NeighborhoodConfig& cfg) {
    if (cfg.step_deg <= 0.0) throw Error("neighborhood step must be > 0");
    const double d = cfg.step_deg;
    const double offsets[12][2] = {
        {+d, 0}, {-d, 0}, {+2 * d, 0}, {-2 * d, 0},
        {0, +d}, {0, -d}, {0, +2 * d}, {0, -2 * d},
        {+d, +d}, {-d, +d}, {+d, -d}, {-d, -d},
    };

    auto wrap_az = [](double az) {
        az = std::fmod(az, 360.0);
        if (az < 0.0) az += 360.0;
        return az;
    };

    std::vector<CameraPose> poses;
    poses.reserve(13);
    poses.push_back({std::clamp(center.elevation_deg, -89.0, 89.0),
                     wrap_az(center.azimuth_deg)});
    for (const auto& off : offsets) {
        CameraPose pose;
        pose.elevation_deg = std::clamp(center.elevation_deg + off[0], -89.0, 89.0);
        pose.azimuth_deg = wrap_az(center.azimuth_deg + off[1]);
        auto collides = [&]() {
            return std::any_of(poses.begin(), poses.end(), [&](const CameraPose& q) {
                return q.elevation_deg == pose.elevation_deg &&
                       q.azimuth_deg == pose.azimuth_deg;
            });
        };
        while (collides()) pose.azimuth_deg = wrap_az(pose.azimuth_deg + 0.5);
        poses.push_back(pose);
    }
    return poses;
}

}  // namespace fitrec
