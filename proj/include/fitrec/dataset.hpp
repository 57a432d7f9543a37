#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fitrec/geometry.hpp"

namespace fitrec {

/// Ordered class labels. Index in the list is the label used everywhere else.
class Taxonomy {
public:
    Taxonomy() = default;
    explicit Taxonomy(std::vector<std::string> labels);

    /// The 18 plant fitting types handled by this project.
    static Taxonomy default_taxonomy();

    int size() const { return static_cast<int>(labels_.size()); }
    const std::string& label(int index) const { return labels_.at(index); }
    const std::vector<std::string>& labels() const { return labels_; }

    /// Index of a label name; throws UnknownLabel.
    int index_of(const std::string& label) const;
    bool contains(const std::string& label) const;

    bool operator==(const Taxonomy& o) const { return labels_ == o.labels_; }

private:
    std::vector<std::string> labels_;
};

struct Sample {
    std::string id;
    int label = -1;    // taxonomy index
    std::string path;  // cloud file location
};

struct Manifest {
    Taxonomy taxonomy;
    std::vector<Sample> samples;

    /// Tally of sample labels per taxonomy index.
    std::vector<int> class_counts() const;
};

struct SplitConfig {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Manifest train;
    Manifest val;
    /// Classes whose validation side ended up empty (e.g. single-sample classes).
    std::vector<int> classes_without_val;
};

// --- point cloud files -------------------------------------------------------
// Plain text, one "x y z" triple per line, single spaces, 9 significant
// digits, '#' starts a comment line, '\n' endings, no locale dependence.

PointCloud read_point_cloud(const std::string& path);
void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       const std::string& comment = "");

/// In-memory form of the cloud file (exact bytes written by write_point_cloud).
/// A non-empty comment becomes a leading "# ..." line.
std::string format_point_cloud(const PointCloud& cloud, const std::string& comment = "");
PointCloud parse_point_cloud(const std::string& text, const std::string& origin = "<string>");

// --- taxonomy / manifest files ----------------------------------------------
// Taxonomy: one label per line. Manifest: CSV with header "id,label,path";
// the label column holds the class name. Non-empty comments become a leading
// "# ..." line in both files.

Taxonomy load_taxonomy(const std::string& path);
void save_taxonomy(const Taxonomy& taxonomy, const std::string& path,
                   const std::string& comment = "");

Manifest load_manifest(const std::string& csv_path, const std::string& taxonomy_path);
void save_manifest(const Manifest& manifest, const std::string& csv_path,
                   const std::string& taxonomy_path, const std::string& comment = "");

// --- split -------------------------------------------------------------------

/// Per-class split: round(train_fraction * n) to train, clamped so both sides
/// get at least one sample when n >= 2. Single-sample classes go to train.
/// Deterministic per seed. Throws EmptyClass when a class has no samples.
SplitResult stratified_split(const Manifest& manifest, const SplitConfig& cfg);

}  // namespace fitrec
