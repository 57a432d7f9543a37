#include "fitrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "fitrec/rng.hpp"

namespace fitrec {

namespace {

// Orthonormal basis completion: u, v perpendicular to unit w.
void make_basis(const Vec3& w, Vec3& u, Vec3& v) {
    const Vec3 ref = (std::abs(w.z) < 0.9) ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    u = w.cross(ref).normalized();
    v = w.cross(u);
}

// One parametric surface patch. Components are unions of these; sampling is
// area-weighted across patches and area-uniform within each patch.
struct Patch {
    enum Kind { Cylinder, Disk, Cone, Torus } kind;
    Vec3 origin;       // base center (Cylinder/Cone), center (Disk/Torus)
    Vec3 axis;         // unit
    Vec3 xdir;         // unit, perpendicular to axis; torus sweep start
    double r0 = 0.0;   // radius / outer radius / base radius / bend radius
    double r1 = 0.0;   // inner radius (Disk), top radius (Cone), tube radius (Torus)
    double length = 0.0;
    double sweep_rad = 0.0;     // Torus only
    Vec3 top_offset;            // Cone only: top-center displacement (eccentric)

    double area() const {
        switch (kind) {
            case Cylinder: return 2.0 * M_PI * r0 * length;
            case Disk: return M_PI * (r0 * r0 - r1 * r1);
            case Cone: {
                const double slant = std::sqrt(length * length + (r1 - r0) * (r1 - r0));
                return M_PI * (r0 + r1) * slant;
            }
            case Torus: return sweep_rad * 2.0 * M_PI * r1 * r0;
        }
        return 0.0;
    }

    Vec3 sample(Rng& rng) const {
        Vec3 u, v;
        switch (kind) {
            case Cylinder: {
                make_basis(axis, u, v);
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                const double z = rng.uniform01() * length;
                return origin + axis * z + (u * std::cos(phi) + v * std::sin(phi)) * r0;
            }
            case Disk: {
                make_basis(axis, u, v);
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                const double rho = std::sqrt(rng.uniform(r1 * r1, r0 * r0));
                return origin + (u * std::cos(phi) + v * std::sin(phi)) * rho;
            }
            case Cone: {
                make_basis(axis, u, v);
                // height density proportional to the local radius
                const double a = r0, b = r1;
                const double uu = rng.uniform01();
                double t;
                if (std::abs(b - a) < 1e-12) {
                    t = uu;
                } else {
                    t = (-a + std::sqrt(a * a + uu * (b - a) * (a + b))) / (b - a);
                }
                const double rho = a + (b - a) * t;
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                return origin + axis * (t * length) + top_offset * t +
                       (u * std::cos(phi) + v * std::sin(phi)) * rho;
            }
            case Torus: {
                u = xdir;
                v = axis.cross(u);
                const double phi = rng.uniform01() * sweep_rad;
                // tube angle density proportional to (R + r cos psi)
                double psi;
                for (;;) {
                    psi = rng.uniform(0.0, 2.0 * M_PI);
                    if (rng.uniform01() * (r0 + r1) <= r0 + r1 * std::cos(psi)) break;
                }
                const Vec3 radial = u * std::cos(phi) + v * std::sin(phi);
                return origin + radial * (r0 + r1 * std::cos(psi)) + axis * (r1 * std::sin(psi));
            }
        }
        return {};
    }
};

Patch cylinder(Vec3 base, Vec3 axis, double r, double len) {
    Patch p;
    p.kind = Patch::Cylinder;
    p.origin = base;
    p.axis = axis.normalized();
    p.r0 = r;
    p.length = len;
    return p;
}

Patch disk(Vec3 center, Vec3 normal, double r_out, double r_in = 0.0) {
    Patch p;
    p.kind = Patch::Disk;
    p.origin = center;
    p.axis = normal.normalized();
    p.r0 = r_out;
    p.r1 = r_in;
    return p;
}

Patch cone(Vec3 base, Vec3 axis, double r_base, double r_top, double len,
           Vec3 top_offset = {}) {
    Patch p;
    p.kind = Patch::Cone;
    p.origin = base;
    p.axis = axis.normalized();
    p.r0 = r_base;
    p.r1 = r_top;
    p.length = len;
    p.top_offset = top_offset;
    return p;
}

Patch torus(Vec3 center, Vec3 plane_normal, Vec3 sweep_start, double bend_r,
            double tube_r, double sweep_rad) {
    Patch p;
    p.kind = Patch::Torus;
    p.origin = center;
    p.axis = plane_normal.normalized();
    p.xdir = sweep_start.normalized();
    p.r0 = bend_r;
    p.r1 = tube_r;
    p.sweep_rad = sweep_rad;
    return p;
}

const Vec3 kX{1, 0, 0}, kY{0, 1, 0}, kZ{0, 0, 1};

// Flange plate: both annulus faces plus the outer rim, from z0 to z0+t.
void add_plate(std::vector<Patch>& ps, double z0, double t, double r_out, double r_in) {
    ps.push_back(disk({0, 0, z0}, kZ * -1.0, r_out, r_in));
    ps.push_back(disk({0, 0, z0 + t}, kZ, r_out, r_in));
    ps.push_back(cylinder({0, 0, z0}, kZ, r_out, t));
}

std::vector<Patch> build_patches(const ComponentSpec& s) {
    std::vector<Patch> ps;
    switch (s.kind) {
        case ShapeKind::Pipe:
            ps.push_back(cylinder({0, 0, -s.length / 2}, kZ, s.radius, s.length));
            break;
        case ShapeKind::Elbow90:
        case ShapeKind::ElbowNon90:
            ps.push_back(torus({0, 0, 0}, kZ, kX, s.bend_radius, s.radius,
                               s.sweep_deg * M_PI / 180.0));
            break;
        case ShapeKind::Flange:
            add_plate(ps, 0.0, s.thickness, s.radius, s.hub_radius);
            ps.push_back(cylinder({0, 0, s.thickness}, kZ, s.hub_radius, s.hub_length));
            break;
        case ShapeKind::FlangeWN: {
            // flange plus an elongated tapered welding hub down to pipe size
            add_plate(ps, 0.0, s.thickness, s.radius, s.hub_radius);
            const double pipe_r = s.hub_radius * 0.62;
            ps.push_back(cone({0, 0, s.thickness}, kZ, s.hub_radius, pipe_r, s.hub_length));
            ps.push_back(cylinder({0, 0, s.thickness + s.hub_length}, kZ, pipe_r,
                                  s.hub_length * 0.45));
            break;
        }
        case ShapeKind::BlindFlange:
            add_plate(ps, 0.0, s.thickness, s.radius, 0.0);
            break;
        case ShapeKind::Tee:
        case ShapeKind::TeeRed:
            ps.push_back(cylinder({0, 0, -s.length / 2}, kZ, s.radius, s.length));
            ps.push_back(cylinder({0, 0, 0}, kX, s.branch_radius, s.branch_length));
            break;
        case ShapeKind::Cross:
            ps.push_back(cylinder({0, 0, -s.length / 2}, kZ, s.radius, s.length));
            ps.push_back(cylinder({-s.branch_length, 0, 0}, kX, s.branch_radius,
                                  2.0 * s.branch_length));
            break;
        case ShapeKind::Wye:
            ps.push_back(cylinder({0, 0, -s.length / 2}, kZ, s.radius, s.length));
            ps.push_back(cylinder({0, 0, 0}, Vec3{1, 0, 1}.normalized(),
                                  s.branch_radius, s.branch_length));
            break;
        case ShapeKind::ReducerConc:
            ps.push_back(cone({0, 0, 0}, kZ, s.radius, s.radius2, s.length));
            break;
        case ShapeKind::ReducerEcc:
            // top circle shifted sideways so one side runs flat
            ps.push_back(cone({0, 0, 0}, kZ, s.radius, s.radius2, s.length,
                              kX * (s.radius - s.radius2)));
            break;
        case ShapeKind::ReducerInsert:
            ps.push_back(cone({0, 0, 0}, kZ, s.radius, s.radius2, s.length));
            ps.push_back(disk({0, 0, 0}, kZ * -1.0, s.radius, s.radius2 * 0.8));
            break;
        case ShapeKind::Olet:
            ps.push_back(cone({0, 0, 0}, kZ, s.radius, s.branch_radius, s.length));
            ps.push_back(cylinder({0, 0, s.length}, kZ, s.branch_radius, s.branch_length));
            ps.push_back(disk({0, 0, s.length + s.branch_length}, kZ, s.branch_radius,
                              s.branch_radius * 0.7));
            break;
        case ShapeKind::OrificeFlange:
            // extra-thick plate with hubs on both faces
            add_plate(ps, 0.0, s.thickness, s.radius, s.hub_radius);
            ps.push_back(cylinder({0, 0, s.thickness}, kZ, s.hub_radius, s.hub_length));
            ps.push_back(cylinder({0, 0, -s.hub_length}, kZ, s.hub_radius, s.hub_length));
            break;
        case ShapeKind::Valve: {
            // hourglass body, stem and a handwheel rim
            const double half = s.length / 2;
            ps.push_back(cone({0, 0, -half}, kZ, s.radius, s.branch_radius, half));
            ps.push_back(cone({0, 0, 0}, kZ, s.branch_radius, s.radius, half));
            ps.push_back(disk({0, 0, -half}, kZ * -1.0, s.radius, s.radius * 0.5));
            ps.push_back(disk({0, 0, half}, kZ, s.radius, s.radius * 0.5));
            ps.push_back(cylinder({0, 0, 0}, kX, s.hub_radius, s.hub_length));
            ps.push_back(disk({s.hub_length, 0, 0}, kX, s.radius * 0.7, s.hub_radius));
            ps.push_back(cylinder({s.hub_length - 0.012, 0, 0}, kX, s.radius * 0.7, 0.012));
            break;
        }
        case ShapeKind::SafetyValve: {
            // inlet riser, larger spring housing above, side outlet
            ps.push_back(cylinder({0, 0, -s.length}, kZ, s.radius, s.length));
            ps.push_back(cylinder({0, 0, 0}, kZ, s.hub_radius, s.hub_length));
            ps.push_back(disk({0, 0, s.hub_length}, kZ, s.hub_radius, 0.0));
            ps.push_back(disk({0, 0, 0}, kZ * -1.0, s.hub_radius, s.radius));
            ps.push_back(cylinder({0, 0, -s.length * 0.4}, kX, s.branch_radius,
                                  s.branch_length));
            break;
        }
        case ShapeKind::Strainer: {
            // run pipe with an oblique pot hanging off at 45 degrees
            ps.push_back(cylinder({-s.length / 2, 0, 0}, kX, s.radius, s.length));
            const Vec3 pot_axis = Vec3{1, 0, -1}.normalized();
            ps.push_back(cylinder({0, 0, 0}, pot_axis, s.branch_radius, s.branch_length));
            ps.push_back(disk(pot_axis * s.branch_length, pot_axis, s.branch_radius, 0.0));
            break;
        }
    }
    return ps;
}

void validate_spec(const ComponentSpec& s) {
    auto need_pos = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidSpec(std::string("dimension must be > 0: ") + name);
    };
    switch (s.kind) {
        case ShapeKind::Pipe:
            need_pos(s.radius, "radius");
            need_pos(s.length, "length");
            break;
        case ShapeKind::Elbow90:
        case ShapeKind::ElbowNon90:
            need_pos(s.radius, "radius");
            need_pos(s.bend_radius, "bend_radius");
            if (!(s.sweep_deg > 0.0 && s.sweep_deg <= 180.0))
                throw InvalidSpec("sweep angle must be in (0, 180]");
            break;
        case ShapeKind::Flange:
        case ShapeKind::FlangeWN:
        case ShapeKind::OrificeFlange:
            need_pos(s.radius, "radius");
            need_pos(s.thickness, "thickness");
            need_pos(s.hub_radius, "hub_radius");
            need_pos(s.hub_length, "hub_length");
            if (s.hub_radius >= s.radius)
                throw InvalidSpec("hub radius must be smaller than the plate radius");
            break;
        case ShapeKind::BlindFlange:
            need_pos(s.radius, "radius");
            need_pos(s.thickness, "thickness");
            break;
        case ShapeKind::Tee:
        case ShapeKind::TeeRed:
        case ShapeKind::Cross:
        case ShapeKind::Wye:
        case ShapeKind::Strainer:
            need_pos(s.radius, "radius");
            need_pos(s.length, "length");
            need_pos(s.branch_radius, "branch_radius");
            need_pos(s.branch_length, "branch_length");
            break;
        case ShapeKind::ReducerConc:
        case ShapeKind::ReducerEcc:
        case ShapeKind::ReducerInsert:
            need_pos(s.radius, "radius");
            need_pos(s.radius2, "radius2");
            need_pos(s.length, "length");
            break;
        case ShapeKind::Olet:
            need_pos(s.radius, "radius");
            need_pos(s.branch_radius, "branch_radius");
            need_pos(s.branch_length, "branch_length");
            need_pos(s.length, "length");
            break;
        case ShapeKind::Valve:
            need_pos(s.radius, "radius");
            need_pos(s.length, "length");
            need_pos(s.branch_radius, "branch_radius");
            need_pos(s.hub_radius, "hub_radius");
            need_pos(s.hub_length, "hub_length");
            break;
        case ShapeKind::SafetyValve:
            need_pos(s.radius, "radius");
            need_pos(s.length, "length");
            need_pos(s.branch_radius, "branch_radius");
            need_pos(s.branch_length, "branch_length");
            need_pos(s.hub_radius, "hub_radius");
            need_pos(s.hub_length, "hub_length");
            break;
    }
}

struct KindEntry {
    const char* label;
    ShapeKind kind;
};

constexpr KindEntry kKindTable[] = {
    {"Blind Flange", ShapeKind::BlindFlange},
    {"Cross", ShapeKind::Cross},
    {"Elbow 90", ShapeKind::Elbow90},
    {"Elbow non 90", ShapeKind::ElbowNon90},
    {"Flange", ShapeKind::Flange},
    {"Flange WN", ShapeKind::FlangeWN},
    {"Olet", ShapeKind::Olet},
    {"Orifice Flange", ShapeKind::OrificeFlange},
    {"Pipe", ShapeKind::Pipe},
    {"Reducer CONC", ShapeKind::ReducerConc},
    {"Reducer ECC", ShapeKind::ReducerEcc},
    {"Reducer Insert", ShapeKind::ReducerInsert},
    {"Safety Valve", ShapeKind::SafetyValve},
    {"Strainer", ShapeKind::Strainer},
    {"Tee", ShapeKind::Tee},
    {"Tee RED", ShapeKind::TeeRed},
    {"Valve", ShapeKind::Valve},
    {"Wye", ShapeKind::Wye},
};

std::string slug(const std::string& label) {
    std::string s;
    for (char c : label) {
        if (c == ' ') s += '_';
        else s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

}  // namespace

ShapeKind shape_kind_for_label(const std::string& label) {
    for (const auto& e : kKindTable)
        if (label == e.label) return e.kind;
    throw InvalidSpec("no generator for label: " + label);
}

ComponentSpec default_component_spec(ShapeKind kind) {
    ComponentSpec s;
    s.kind = kind;
    switch (kind) {
        case ShapeKind::Pipe:
            s.radius = 0.06; s.length = 0.8;
            break;
        case ShapeKind::Elbow90:
            s.radius = 0.06; s.bend_radius = 0.15; s.sweep_deg = 90.0;
            break;
        case ShapeKind::ElbowNon90:
            s.radius = 0.06; s.bend_radius = 0.15; s.sweep_deg = 45.0;
            break;
        case ShapeKind::Flange:
            s.radius = 0.11; s.thickness = 0.025; s.hub_radius = 0.06; s.hub_length = 0.04;
            break;
        case ShapeKind::FlangeWN:
            s.radius = 0.11; s.thickness = 0.025; s.hub_radius = 0.06; s.hub_length = 0.12;
            break;
        case ShapeKind::BlindFlange:
            s.radius = 0.11; s.thickness = 0.03;
            break;
        case ShapeKind::Tee:
            s.radius = 0.06; s.length = 0.45;
            s.branch_radius = 0.06; s.branch_length = 0.2;
            break;
        case ShapeKind::TeeRed:
            s.radius = 0.06; s.length = 0.45;
            s.branch_radius = 0.035; s.branch_length = 0.18;
            break;
        case ShapeKind::Cross:
            s.radius = 0.06; s.length = 0.45;
            s.branch_radius = 0.06; s.branch_length = 0.2;
            break;
        case ShapeKind::Wye:
            s.radius = 0.06; s.length = 0.5;
            s.branch_radius = 0.06; s.branch_length = 0.25;
            break;
        case ShapeKind::ReducerConc:
            s.radius = 0.08; s.radius2 = 0.045; s.length = 0.25;
            break;
        case ShapeKind::ReducerEcc:
            s.radius = 0.08; s.radius2 = 0.045; s.length = 0.25;
            break;
        case ShapeKind::ReducerInsert:
            s.radius = 0.07; s.radius2 = 0.03; s.length = 0.09;
            break;
        case ShapeKind::Olet:
            s.radius = 0.05; s.branch_radius = 0.03; s.branch_length = 0.05; s.length = 0.04;
            break;
        case ShapeKind::OrificeFlange:
            s.radius = 0.115; s.thickness = 0.06; s.hub_radius = 0.06; s.hub_length = 0.035;
            break;
        case ShapeKind::Valve:
            s.radius = 0.09; s.branch_radius = 0.05; s.length = 0.24;
            s.hub_radius = 0.018; s.hub_length = 0.14;
            break;
        case ShapeKind::SafetyValve:
            s.radius = 0.035; s.length = 0.12; s.hub_radius = 0.055; s.hub_length = 0.2;
            s.branch_radius = 0.035; s.branch_length = 0.14;
            break;
        case ShapeKind::Strainer:
            s.radius = 0.05; s.length = 0.32;
            s.branch_radius = 0.065; s.branch_length = 0.18;
            break;
    }
    return s;
}

PointCloud generate_component_surface(const ComponentSpec& spec, double density,
                                      std::uint64_t seed) {
    validate_spec(spec);
    if (!(density > 0.0)) throw InvalidSpec("density must be > 0");

    const std::vector<Patch> patches = build_patches(spec);
    std::vector<double> cum;
    cum.reserve(patches.size());
    double total = 0.0;
    for (const Patch& p : patches) {
        total += p.area();
        cum.push_back(total);
    }
    const std::size_t count =
        static_cast<std::size_t>(std::max<long long>(1, std::llround(density * total)));

    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double pick = rng.uniform01() * total;
        const std::size_t pi =
            std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin();
        cloud.points.push_back(patches[std::min(pi, patches.size() - 1)].sample(rng));
    }
    return cloud;
}

PointCloud simulate_scan(const PointCloud& surface, const ScanConfig& cfg) {
    if (surface.points.empty()) throw EmptyCloud();
    if (!(cfg.reference_density > 0.0) || cfg.noise_sigma < 0.0 || !(cfg.bin_deg > 0.0))
        throw Error("invalid scan config");

    const BoundingSphere bs = bounding_sphere(surface);
    if ((cfg.scanner_position - bs.center).norm() <= bs.radius)
        throw ScannerInsideObject();

    Rng rng(cfg.seed);
    const std::uint32_t n = static_cast<std::uint32_t>(surface.points.size());
    std::vector<char> occluded(n, 0);

    if (cfg.occlusion) {
        // nearest point per (elevation, azimuth) bin survives
        const double bin = cfg.bin_deg * M_PI / 180.0;
        struct Best {
            double dist;
            std::uint32_t index;
        };
        std::unordered_map<std::uint64_t, Best> buffer;
        buffer.reserve(n);
        std::vector<std::uint64_t> keys(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const Vec3 d = surface.points[i] - cfg.scanner_position;
            const double dist = d.norm();
            const double az = std::atan2(d.y, d.x);
            const double el = std::asin(std::clamp(d.z / dist, -1.0, 1.0));
            const auto ka = static_cast<std::uint32_t>(std::floor((az + M_PI) / bin));
            const auto ke = static_cast<std::uint32_t>(std::floor((el + M_PI / 2) / bin));
            const std::uint64_t key = (static_cast<std::uint64_t>(ka) << 32) | ke;
            keys[i] = key;
            auto it = buffer.find(key);
            if (it == buffer.end() || dist < it->second.dist) buffer[key] = {dist, i};
        }
        for (std::uint32_t i = 0; i < n; ++i)
            occluded[i] = buffer[keys[i]].index != i;
    }

    PointCloud out;
    out.id = surface.id;
    out.label = surface.label;
    out.points.reserve(n);
    // the retention draw is consumed for every input point (not only for
    // occlusion survivors) so that, seed for seed, turning occlusion on can
    // only remove points, never admit different ones
    for (std::uint32_t i = 0; i < n; ++i) {
        const double dist = (surface.points[i] - cfg.scanner_position).norm();
        const double p_keep = std::min(1.0, 1.0 / (dist * dist));
        const bool thin_keep = rng.uniform01() < p_keep;
        if (!occluded[i] && thin_keep) out.points.push_back(surface.points[i]);
    }

    if (cfg.noise_sigma > 0.0) {
        for (Vec3& p : out.points) {
            p.x += rng.gaussian() * cfg.noise_sigma;
            p.y += rng.gaussian() * cfg.noise_sigma;
            p.z += rng.gaussian() * cfg.noise_sigma;
        }
    }

    if (cfg.outlier_fraction > 0.0) {
        for (Vec3& p : out.points) {
            if (rng.uniform01() >= cfg.outlier_fraction) continue;
            Vec3 dir{rng.gaussian(), rng.gaussian(), rng.gaussian()};
            if (dir.norm() < 1e-12) dir = kZ;
            p = bs.center + dir.normalized() * (bs.radius * rng.uniform(1.0, 2.0));
        }
    }
    return out;
}

Manifest build_synthetic_corpus(const CorpusConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.counts.size() != static_cast<std::size_t>(cfg.taxonomy.size()))
        throw Error("counts must match taxonomy size");
    if (!(cfg.jitter_lo > 0.0 && cfg.jitter_hi >= cfg.jitter_lo))
        throw Error("invalid jitter range");
    if (!(cfg.distance_lo > 0.0 && cfg.distance_hi >= cfg.distance_lo))
        throw Error("invalid distance range");

    std::error_code ec;
    fs::create_directories(fs::path(cfg.out_dir) / "clouds", ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir + ": " + ec.message());

    Manifest manifest;
    manifest.taxonomy = cfg.taxonomy;

    for (int c = 0; c < cfg.taxonomy.size(); ++c) {
        const ShapeKind kind = shape_kind_for_label(cfg.taxonomy.label(c));
        for (int i = 0; i < cfg.counts[c]; ++i) {
            const std::uint64_t sample_seed =
                derive_seed(cfg.seed, static_cast<std::uint64_t>(c),
                            static_cast<std::uint64_t>(i));

            PointCloud scan;
            bool ok = false;
            // a pathological draw can leave too few survivors; retry with
            // derived sub-seeds so the corpus stays deterministic
            for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
                const std::uint64_t as = derive_seed(sample_seed, attempt);
                Rng rng(derive_seed(as, 0));

                ComponentSpec spec = default_component_spec(kind);
                auto jitter = [&](double& v) {
                    if (v > 0.0) v *= rng.uniform(cfg.jitter_lo, cfg.jitter_hi);
                };
                jitter(spec.radius);
                jitter(spec.length);
                jitter(spec.branch_radius);
                jitter(spec.branch_length);
                jitter(spec.thickness);
                jitter(spec.hub_radius);
                jitter(spec.hub_length);
                jitter(spec.bend_radius);
                jitter(spec.radius2);
                if (kind == ShapeKind::ElbowNon90)
                    spec.sweep_deg = rng.uniform(30.0, 75.0);
                if ((kind == ShapeKind::Flange || kind == ShapeKind::FlangeWN ||
                     kind == ShapeKind::OrificeFlange) &&
                    spec.hub_radius >= spec.radius)
                    spec.hub_radius = spec.radius * 0.55;

                PointCloud surface =
                    generate_component_surface(spec, cfg.scan.reference_density,
                                               derive_seed(as, 1));

                if (cfg.pose_randomization) {
                    // uniform rotation from a random unit quaternion
                    double q[4];
                    double n2 = 0.0;
                    for (double& qi : q) {
                        qi = rng.gaussian();
                        n2 += qi * qi;
                    }
                    const double inv = 1.0 / std::sqrt(n2);
                    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv,
                                 z = q[3] * inv;
                    const double R[3][3] = {
                        {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                        {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                        {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)},
                    };
                    for (Vec3& p : surface.points) {
                        const Vec3 v = p;
                        p = {R[0][0] * v.x + R[0][1] * v.y + R[0][2] * v.z,
                             R[1][0] * v.x + R[1][1] * v.y + R[1][2] * v.z,
                             R[2][0] * v.x + R[2][1] * v.y + R[2][2] * v.z};
                    }
                }

                const BoundingSphere bs = bounding_sphere(surface);
                Vec3 dir{rng.gaussian(), rng.gaussian(), rng.gaussian()};
                if (dir.norm() < 1e-12) dir = kZ;
                dir = dir.normalized();
                double dist = rng.uniform(cfg.distance_lo, cfg.distance_hi);
                dist = std::max(dist, bs.radius * 1.05 + 1e-6);

                ScanConfig scan_cfg = cfg.scan;
                scan_cfg.scanner_position = bs.center + dir * dist;
                scan_cfg.seed = derive_seed(as, 2);
                scan = simulate_scan(surface, scan_cfg);
                ok = scan.points.size() >= 16;
            }
            if (!ok)
                throw Error("could not generate a usable scan for " +
                            cfg.taxonomy.label(c));

            char idbuf[64];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%04d",
                          slug(cfg.taxonomy.label(c)).c_str(), i);
            scan.id = idbuf;
            scan.label = c;

            const std::string rel = std::string("clouds/") + idbuf + ".txt";
            write_point_cloud(scan, (fs::path(cfg.out_dir) / rel).string(),
                              cfg.header_comment);
            manifest.samples.push_back({scan.id, c, rel});
        }
    }

    save_manifest(manifest, (fs::path(cfg.out_dir) / "manifest.csv").string(),
                  (fs::path(cfg.out_dir) / "taxonomy.txt").string(),
                  cfg.header_comment);
    return manifest;
}

CorpusConfig load_corpus_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::ordered_json j;
    try {
        // ignore_comments: emitted configs carry a leading "// seed=..." line
        j = nlohmann::ordered_json::parse(in, nullptr, true, true);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad JSON in ") + path + ": " + e.what(), 0);
    }

    CorpusConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("classes")) {
        std::vector<std::string> labels;
        std::vector<int> counts;
        for (auto& [label, count] : j.at("classes").items()) {
            labels.push_back(label);
            counts.push_back(count.get<int>());
            if (counts.back() < 0) throw Error("class counts must be >= 0");
        }
        cfg.taxonomy = Taxonomy(labels);
        cfg.counts = counts;
    } else {
        cfg.counts.assign(cfg.taxonomy.size(), 0);
    }
    if (j.contains("dimension_jitter")) {
        cfg.jitter_lo = j["dimension_jitter"].at(0).get<double>();
        cfg.jitter_hi = j["dimension_jitter"].at(1).get<double>();
    }
    if (j.contains("distance_range")) {
        cfg.distance_lo = j["distance_range"].at(0).get<double>();
        cfg.distance_hi = j["distance_range"].at(1).get<double>();
    }
    cfg.pose_randomization = j.value("pose_randomization", true);
    cfg.scan.occlusion = j.value("occlusion", true);
    cfg.scan.noise_sigma = j.value("noise_sigma", 0.0);
    cfg.scan.reference_density = j.value("reference_density", 30000.0);
    cfg.scan.bin_deg = j.value("bin_deg", 0.25);
    cfg.scan.outlier_fraction = j.value("outlier_fraction", 0.0);
    cfg.out_dir = j.value("out_dir", std::string{});
    return cfg;
}

std::string format_corpus_config(const CorpusConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    nlohmann::ordered_json classes;
    for (int c = 0; c < cfg.taxonomy.size(); ++c)
        classes[cfg.taxonomy.label(c)] = cfg.counts.empty() ? 0 : cfg.counts[c];
    j["classes"] = classes;
    j["dimension_jitter"] = {cfg.jitter_lo, cfg.jitter_hi};
    j["distance_range"] = {cfg.distance_lo, cfg.distance_hi};
    j["pose_randomization"] = cfg.pose_randomization;
    j["occlusion"] = cfg.scan.occlusion;
    j["noise_sigma"] = cfg.scan.noise_sigma;
    j["reference_density"] = cfg.scan.reference_density;
    j["bin_deg"] = cfg.scan.bin_deg;
    j["outlier_fraction"] = cfg.scan.outlier_fraction;
    return j.dump(2) + "\n";
}

}  // namespace fitrec
