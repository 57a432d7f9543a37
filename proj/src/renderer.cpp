#include "fitrec/renderer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace fitrec {

std::size_t DepthImage::occupied_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : pixels)
        if (v != 0) ++n;
    return n;
}

DepthImage render_depth_image(const PointCloud& cloud, const CameraPose& pose,
                              const RenderConfig& cfg) {
    if (cfg.width < 1 || cfg.height < 1) throw Error("render size must be >= 1");
    if (cloud.points.empty()) throw EmptyCloud();

    if (cfg.require_normalized) {
        for (const Vec3& p : cloud.points)
            if (p.squared_norm() > (1.0 + 1e-6) * (1.0 + 1e-6))
                throw NotNormalized("point norm " + std::to_string(p.norm()) +
                                    " exceeds 1 + 1e-6");
    }

    const Vec3 pos = pose.position();
    const Vec3 f = pos * -1.0;
    Vec3 up_ref = (std::abs(f.z) > 0.999) ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
    Vec3 u = (up_ref - f * up_ref.dot(f)).normalized();
    Vec3 r = u.cross(f).normalized();

    const int w = cfg.width, h = cfg.height;
    std::vector<double> depth(static_cast<std::size_t>(w) * h,
                              std::numeric_limits<double>::infinity());

    for (const Vec3& p : cloud.points) {
        const Vec3 d = p - pos;
        const double a = d.dot(r);
        const double b = d.dot(u);
        if (a < -1.0 || a > 1.0 || b < -1.0 || b > 1.0) continue;
        const int col = std::min(static_cast<int>(std::floor((a + 1.0) * 0.5 * w)), w - 1);
        const int row = std::min(static_cast<int>(std::floor((1.0 - b) * 0.5 * h)), h - 1);
        const double t = d.dot(f);
        double& cell = depth[static_cast<std::size_t>(row) * w + col];
        cell = std::min(cell, t);
    }

    DepthImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, 0);
    const double span = cfg.t_max - cfg.t_min;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (!std::isfinite(depth[i])) continue;
        const double t = std::clamp(depth[i], cfg.t_min, cfg.t_max);
        const long v = std::lround(255.0 - (t - cfg.t_min) / span * 254.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 1L, 255L));
    }
    return img;
}

double compute_acquisition_rate(const DepthImage& image, std::size_t n_points) {
    if (n_points == 0) throw ZeroPoints();
    return static_cast<double>(image.occupied_count()) / static_cast<double>(n_points);
}

std::vector<DepthImage> render_view_set(const PointCloud& cloud,
                                        const std::vector<CameraPose>& poses,
                                        const RenderConfig& cfg) {
    std::vector<DepthImage> images;
    images.reserve(poses.size());
    for (const CameraPose& pose : poses) images.push_back(render_depth_image(cloud, pose, cfg));
    return images;
}

void write_pgm(const DepthImage& image, const std::string& path,
               const std::string& comment) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n";
    if (!comment.empty()) out << "# " << comment << "\n";
    out << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed for " + path);
}

namespace {

/// next header token, skipping whitespace and '#'-to-end-of-line comments
int pgm_header_int(std::istream& in, const std::string& path) {
    int ch = in.get();
    while (ch == '#' || std::isspace(ch)) {
        if (ch == '#')
            while (ch != '\n' && ch != EOF) ch = in.get();
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch)) throw ParseError("bad PGM header in " + path, 1);
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    if (ch != EOF) in.unget();
    return value;
}

}  // namespace

DepthImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError("not a P5 PGM: " + path, 1);
    const int w = pgm_header_int(in, path);
    const int h = pgm_header_int(in, path);
    const int maxval = pgm_header_int(in, path);
    if (!in || w < 1 || h < 1 || maxval != 255)
        throw ParseError("bad PGM header in " + path, 1);
    in.get();  // single whitespace byte after maxval
    DepthImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw ParseError("truncated PGM payload in " + path, 1);
    return img;
}

DepthImage downsample_block_average(const DepthImage& image, int side) {
    if (side < 1) throw Error("target side must be >= 1");
    if (side == image.width && side == image.height) return image;
    DepthImage out;
    out.width = side;
    out.height = side;
    out.pixels.resize(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r) {
        const int r0 = r * image.height / side;
        const int r1 = std::max((r + 1) * image.height / side, r0 + 1);
        for (int c = 0; c < side; ++c) {
            const int c0 = c * image.width / side;
            const int c1 = std::max((c + 1) * image.width / side, c0 + 1);
            long sum = 0;
            for (int i = r0; i < r1; ++i)
                for (int j = c0; j < c1; ++j) sum += image.pixels[i * image.width + j];
            const long area = static_cast<long>(r1 - r0) * (c1 - c0);
            out.pixels[r * side + c] =
                static_cast<std::uint8_t>((sum + area / 2) / area);
        }
    }
    return out;
}

}  // namespace fitrec
