#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fitrec/dataset.hpp"
#include "fitrec/eval.hpp"
#include "fitrec/renderer.hpp"
#include "fitrec/train.hpp"
#include "fitrec/views.hpp"

// Glue between the geometry/view/render layers and the two networks: camera
// planning per strategy, dataset assembly from a corpus on disk, and the
// six-configuration experiment suite with its report files.

namespace fitrec {

enum class ViewStrategy { Ring12, Ransac, AcqRate };

/// "ring12" | "ransac" | "acqrate"
ViewStrategy parse_view_strategy(const std::string& name);
std::string view_strategy_name(ViewStrategy s);

struct ViewPlanConfig {
    ViewStrategy strategy = ViewStrategy::Ring12;
    int degree = 10;      // neighborhood step in degrees (ransac/acqrate only)
    RenderConfig probe;   // resolution used when strategies probe acquisition rates
    RansacConfig ransac;  // plane-fit settings; seed is per cloud
};

/// Camera poses for one normalized cloud: 12 ring poses, or the strategy's
/// center view plus its 12-pose neighborhood (13 total).
std::vector<CameraPose> plan_views(const PointCloud& cloud, const ViewPlanConfig& cfg);

// ---- artifact headers -------------------------------------------------------

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(const std::string& data);

/// "seed=<seed> config=<16-hex-digit fnv1a of config_text>" — the comment
/// line every emitted artifact carries.
std::string artifact_header(std::uint64_t seed, const std::string& config_text);

// ---- dataset assembly -------------------------------------------------------

/// Loads each sample's cloud, normalizes it to the unit sphere and samples a
/// fixed-size point set. Per-sample randomness derives from (seed, id), so
/// membership in train or val does not change a sample's points.
PointDataset make_point_dataset(const std::vector<Sample>& samples,
                                const std::string& base_dir, int n_points,
                                std::uint64_t seed);

/// Renders each sample's planned views at image_side and scales intensities
/// to [0,1]. All samples of one strategy yield the same view count.
ViewDataset make_view_dataset(const std::vector<Sample>& samples, const std::string& base_dir,
                              const ViewPlanConfig& plan, int image_side, std::uint64_t seed);

/// Nearest-centroid classification accuracy of a point dataset: per-class
/// centroid of the flattened training points, val assigned to the nearest.
/// A quick separability floor for a corpus, independent of any network.
double nearest_centroid_accuracy(const PointDataset& train, const PointDataset& val,
                                 int classes);

// ---- experiment suite -------------------------------------------------------

struct SuiteCase {
    std::string name;         // file-name stem, e.g. "ransac10"
    std::string input_label;  // table row label, e.g. "RANSAC (Degree 10)"
    std::string network;      // "multi-view" or "point-set"
    EvalReport report;
    EvalReport excluded_report;  // populated when exclusions were configured
    std::vector<EpochStats> history;
};

struct SuiteConfig {
    std::string corpus_dir;
    std::string out_dir;
    int image_side = 64;
    int probe_res = 227;
    int n_points = 2048;
    TrainConfig point_train;  // defaults set in make_default_suite_config
    TrainConfig view_train;
    double train_fraction = 0.8;
    std::vector<std::string> exclusions;  // class names dropped in the second table
    std::uint64_t seed = 1;
    Distance metric = Distance::Euclidean;
};

/// Spec defaults: point-set batch 32 / lr 1e-4, multi-view batch 64 / lr 1e-3.
SuiteConfig make_default_suite_config();

struct SuiteResult {
    std::vector<SuiteCase> cases;  // six, fixed order
};

/// Runs the six configurations (ring12 / ransac@10 / ransac@40 / acqrate@10 /
/// acqrate@40 on the multi-view net; sampled point clouds on the point-set
/// net). Progress lines go to `log` when given.
SuiteResult run_experiment_suite(const SuiteConfig& cfg, std::ostream* log = nullptr);

/// Emits summary.csv (one row per case), summary_excluded.csv (when
/// exclusions were configured), class_accuracy.csv (classes x cases),
/// pr_<case>.csv and pr_<case>_classes.csv into cfg.out_dir.
void write_suite_reports(const SuiteResult& result, const SuiteConfig& cfg,
                         const Taxonomy& taxonomy);

/// Classification records for a trained model over a sample list; embeddings
/// come from the pooled feature layer, scores are softmax probabilities.
std::vector<PredictionRecord> evaluate_pointnet(const PointNetParams<float>& params,
                                                const std::vector<Sample>& samples,
                                                const PointDataset& data);
std::vector<PredictionRecord> evaluate_mvcnn(const MvcnnParams<float>& params,
                                             const std::vector<Sample>& samples,
                                             const ViewDataset& data);

}  // namespace fitrec
