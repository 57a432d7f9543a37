#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fitrec/dataset.hpp"
#include "fitrec/geometry.hpp"

namespace fitrec {

/// The component families the generator can produce. Complex catalog types
/// are composed from the same primitives with distinguishing proportions.
enum class ShapeKind {
    BlindFlange, Cross, Elbow90, ElbowNon90, Flange, FlangeWN,
    Olet, OrificeFlange, Pipe, ReducerConc, ReducerEcc, ReducerInsert,
    SafetyValve, Strainer, Tee, TeeRed, Valve, Wye,
};

/// Generator recipe for one component. Which dimensions apply depends on the
/// kind; unused ones are ignored. All lengths in meters.
struct ComponentSpec {
    ShapeKind kind = ShapeKind::Pipe;
    double radius = 0.0;         // main tube / disk radius
    double length = 0.0;         // main length / arm length
    double branch_radius = 0.0;
    double branch_length = 0.0;
    double thickness = 0.0;      // flange plate thickness
    double hub_radius = 0.0;
    double hub_length = 0.0;
    double bend_radius = 0.0;    // elbow bend-circle radius
    double sweep_deg = 90.0;     // elbow sweep, (0, 180]
    double radius2 = 0.0;        // far-end radius (reducers)
};

/// Canonical desk-scale dimensions for a kind.
ComponentSpec default_component_spec(ShapeKind kind);

/// Generator kind for a taxonomy label; throws InvalidSpec for labels the
/// generator does not know.
ShapeKind shape_kind_for_label(const std::string& label);

/// Uniform area sampling of the component's parametric surface; expected
/// point count is density (points per square meter) times surface area.
/// Deterministic per seed. Throws InvalidSpec.
PointCloud generate_component_surface(const ComponentSpec& spec, double density,
                                      std::uint64_t seed);

struct ScanConfig {
    Vec3 scanner_position{0.0, 0.0, 2.0};
    /// Surface sampling density (points per square meter) at the 1 m
    /// reference distance; consumed by the corpus generator when it creates
    /// the surface that simulate_scan then thins.
    double reference_density = 30000.0;
    bool occlusion = true;
    double noise_sigma = 0.0;      // isotropic Gaussian, meters
    double bin_deg = 0.25;         // angular bin of the occlusion depth buffer
    double outlier_fraction = 0.0; // fraction of points flung off the surface
    std::uint64_t seed = 0;
};

/// Laser-scan approximation:
///   1. when occlusion is on, keep only the nearest point per angular bin of
///      a spherical depth buffer centered on the scanner,
///   2. keep each survivor with probability min(1, (1 m / distance)^2),
///   3. add isotropic Gaussian noise of noise_sigma,
///   4. relocate an outlier_fraction of points to 1-2x the bounding radius.
/// Deterministic per seed. Throws ScannerInsideObject.
PointCloud simulate_scan(const PointCloud& surface, const ScanConfig& cfg);

struct CorpusConfig {
    Taxonomy taxonomy = Taxonomy::default_taxonomy();
    std::vector<int> counts;            // per taxonomy index; may be imbalanced
    double jitter_lo = 0.75;            // per-dimension scale factor range
    double jitter_hi = 1.3;
    double distance_lo = 1.2;           // scanner distance range, meters
    double distance_hi = 2.0;
    bool pose_randomization = true;
    ScanConfig scan;                    // position/seed overridden per sample
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string header_comment;         // leading "# ..." line in emitted files
};

/// Generate the configured number of labeled clouds per class, write them and
/// a manifest under out_dir, and return the manifest (paths relative to
/// out_dir). Each sample's random stream is derived from (seed, class,
/// index), so regeneration is byte-identical.
Manifest build_synthetic_corpus(const CorpusConfig& cfg);

/// Read a corpus config from its JSON file (class order in the file defines
/// the taxonomy order).
CorpusConfig load_corpus_config(const std::string& path);
std::string format_corpus_config(const CorpusConfig& cfg);

}  // namespace fitrec
