#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fitrec/camera.hpp"
#include "fitrec/geometry.hpp"

namespace fitrec {

struct RenderConfig {
    int width = 227;
    int height = 227;
    // depth-encoding range in camera-forward units; for a unit-sphere cloud
    // seen from the sphere surface every depth lies in [0, 2]
    double t_min = 0.0;
    double t_max = 2.0;
    // reject clouds whose max norm exceeds 1 + 1e-6; disable to reproduce the
    // oversized-render failure mode on un-normalized input
    bool require_normalized = true;
};

/// 8-bit depth-coded image. Intensity 0 is background; occupied pixels hold
/// 255 at depth 0 down to 1 at the far end of the encoding range (brighter =
/// closer). Row-major, row 0 at the top.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[row * width + col]; }
    std::size_t occupied_count() const;
};

/// Orthographic point rasterization with a nearest-depth z-test.
///
/// Camera frame: forward f = -position; up u = world +Z projected onto the
/// plane perpendicular to f (world +Y when |f.z| > 0.999); right r = u x f.
/// A point p maps to window coordinates a = (p-pos).r, b = (p-pos).u in
/// [-1,1], pixel col = min(floor((a+1)/2 * W), W-1), row = min(floor((1-b)/2
/// * H), H-1), depth t = (p-pos).f. The nearest t wins per pixel and encodes
/// as I = round(255 - clamp(t,0,2)/2 * 254). Point order never changes the
/// result. Points that project outside the window (possible only when the
/// normalization check is off) are skipped.
DepthImage render_depth_image(const PointCloud& cloud, const CameraPose& pose,
                              const RenderConfig& cfg);

/// occupied pixels / point count, in [0,1]. Throws ZeroPoints.
double compute_acquisition_rate(const DepthImage& image, std::size_t n_points);

/// One image per pose, in pose order.
std::vector<DepthImage> render_view_set(const PointCloud& cloud,
                                        const std::vector<CameraPose>& poses,
                                        const RenderConfig& cfg);

// Binary PGM (P5), maxval 255, row-major; bit-exact across runs. A non-empty
// comment becomes a single '#' header line after the magic; the reader skips
// any number of comment lines.
void write_pgm(const DepthImage& image, const std::string& path,
               const std::string& comment = "");
DepthImage read_pgm(const std::string& path);

/// Block-average resize to side x side (integer block boundaries
/// floor(i*src/dst), mean of all covered pixels, rounded to nearest).
DepthImage downsample_block_average(const DepthImage& image, int side);

}  // namespace fitrec
