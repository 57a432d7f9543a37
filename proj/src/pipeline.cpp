#include "fitrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace fs = std::filesystem;

namespace fitrec {

ViewStrategy parse_view_strategy(const std::string& name) {
    if (name == "ring12") return ViewStrategy::Ring12;
    if (name == "ransac") return ViewStrategy::Ransac;
    if (name == "acqrate") return ViewStrategy::AcqRate;
    throw Error("unknown view strategy: " + name + " (expected ring12|ransac|acqrate)");
}

std::string view_strategy_name(ViewStrategy s) {
    switch (s) {
        case ViewStrategy::Ring12: return "ring12";
        case ViewStrategy::Ransac: return "ransac";
        case ViewStrategy::AcqRate: return "acqrate";
    }
    return "?";
}

std::vector<CameraPose> plan_views(const PointCloud& cloud, const ViewPlanConfig& cfg) {
    switch (cfg.strategy) {
        case ViewStrategy::Ring12:
            return ring_cameras();
        case ViewStrategy::Ransac: {
            const Plane plane = fit_plane_ransac(cloud, cfg.ransac);
            const auto [front, back] = candidate_views_from_plane(plane);
            const CameraPose center =
                select_view_by_acquisition_rate(cloud, {front, back}, cfg.probe);
            return expand_view_neighborhood(center, {static_cast<double>(cfg.degree)});
        }
        case ViewStrategy::AcqRate: {
            const CameraPose center =
                select_view_by_acquisition_rate(cloud, dodecahedron_candidates(), cfg.probe);
            return expand_view_neighborhood(center, {static_cast<double>(cfg.degree)});
        }
    }
    throw Error("invalid view strategy value");
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string artifact_header(std::uint64_t seed, const std::string& config_text) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "seed=%llu config=%016llx",
                  static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(fnv1a64(config_text)));
    return buf;
}

// ---- dataset assembly -------------------------------------------------------

namespace {

PointCloud load_normalized(const Sample& s, const std::string& base_dir) {
    const fs::path p = fs::path(base_dir) / s.path;
    PointCloud cloud = read_point_cloud(p.string());
    return normalize_unit_sphere(cloud).first;
}

}  // namespace

PointDataset make_point_dataset(const std::vector<Sample>& samples,
                                const std::string& base_dir, int n_points,
                                std::uint64_t seed) {
    if (n_points < 1) throw Error("point budget must be positive");
    PointDataset ds;
    ds.n_points = n_points;
    ds.pts.reserve(samples.size() * static_cast<std::size_t>(n_points) * 3);
    ds.labels.reserve(samples.size());
    for (const Sample& s : samples) {
        const PointCloud cloud = load_normalized(s, base_dir);
        const PointCloud fixed =
            downsample_points(cloud, static_cast<std::size_t>(n_points),
                              derive_seed(seed, fnv1a64(s.id)));
        for (const Vec3& p : fixed.points) {
            ds.pts.push_back(static_cast<float>(p.x));
            ds.pts.push_back(static_cast<float>(p.y));
            ds.pts.push_back(static_cast<float>(p.z));
        }
        ds.labels.push_back(s.label);
    }
    return ds;
}

ViewDataset make_view_dataset(const std::vector<Sample>& samples, const std::string& base_dir,
                              const ViewPlanConfig& plan, int image_side, std::uint64_t seed) {
    if (image_side < 1) throw Error("image side must be positive");
    ViewDataset ds;
    ds.side = image_side;
    RenderConfig render;
    render.width = image_side;
    render.height = image_side;
    for (const Sample& s : samples) {
        const PointCloud cloud = load_normalized(s, base_dir);
        ViewPlanConfig per_cloud = plan;
        per_cloud.ransac.seed = derive_seed(seed, fnv1a64(s.id));
        const std::vector<CameraPose> poses = plan_views(cloud, per_cloud);
        if (ds.views == 0)
            ds.views = static_cast<int>(poses.size());
        else if (ds.views != static_cast<int>(poses.size()))
            throw ShapeMismatch("view counts differ between samples");
        for (const CameraPose& pose : poses) {
            const DepthImage img = render_depth_image(cloud, pose, render);
            for (std::uint8_t px : img.pixels)
                ds.imgs.push_back(static_cast<float>(px) / 255.0f);
        }
        ds.labels.push_back(s.label);
    }
    return ds;
}

namespace {

/// permutation-invariant cloud descriptor: normalized histogram of point
/// radii (32 bins over [0,1]) — crude but order-free
std::vector<double> radius_histogram(const float* pts, int n_points) {
    std::vector<double> h(32, 0.0);
    for (int i = 0; i < n_points; ++i) {
        const double x = pts[i * 3], y = pts[i * 3 + 1], z = pts[i * 3 + 2];
        const double r = std::sqrt(x * x + y * y + z * z);
        int bin = static_cast<int>(r * 32.0);
        bin = std::clamp(bin, 0, 31);
        h[bin] += 1.0;
    }
    for (double& v : h) v /= n_points;
    return h;
}

}  // namespace

double nearest_centroid_accuracy(const PointDataset& train, const PointDataset& val,
                                 int classes) {
    if (train.size() == 0 || val.size() == 0) throw EmptyTrainSet("empty split");
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(32, 0.0));
    std::vector<int> counts(classes, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto h = radius_histogram(train.sample(i), train.n_points);
        for (int b = 0; b < 32; ++b) centroid[train.labels[i]][b] += h[b];
        counts[train.labels[i]]++;
    }
    for (int c = 0; c < classes; ++c)
        if (counts[c] > 0)
            for (double& v : centroid[c]) v /= counts[c];

    std::size_t correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const auto h = radius_histogram(val.sample(i), val.n_points);
        int best = -1;
        double best_d = 0;
        for (int c = 0; c < classes; ++c) {
            if (counts[c] == 0) continue;
            double d = 0;
            for (int b = 0; b < 32; ++b) {
                const double t = h[b] - centroid[c][b];
                d += t * t;
            }
            if (best < 0 || d < best_d) {
                best = c;
                best_d = d;
            }
        }
        if (best == val.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(val.size());
}

// ---- evaluation records -----------------------------------------------------

std::vector<PredictionRecord> evaluate_pointnet(const PointNetParams<float>& params,
                                                const std::vector<Sample>& samples,
                                                const PointDataset& data) {
    if (samples.size() != data.size()) throw ShapeMismatch("sample list / dataset mismatch");
    std::vector<PredictionRecord> out;
    out.reserve(samples.size());
    PointNetTrace<float> tr;
    std::vector<float> probs(params.cfg.classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        pointnet_forward(data.sample(i), data.n_points, params, tr);
        softmax_cross_entropy(tr.logits.data(), params.cfg.classes, 0, probs.data());
        PredictionRecord r;
        r.id = samples[i].id;
        r.true_label = samples[i].label;
        r.predicted_label = predict_label(tr.logits);
        r.scores = probs;
        r.embedding = tr.pooled;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PredictionRecord> evaluate_mvcnn(const MvcnnParams<float>& params,
                                             const std::vector<Sample>& samples,
                                             const ViewDataset& data) {
    if (samples.size() != data.size()) throw ShapeMismatch("sample list / dataset mismatch");
    std::vector<PredictionRecord> out;
    out.reserve(samples.size());
    MvcnnTrace<float> tr;
    std::vector<float> probs(params.cfg.classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        mvcnn_forward(data.sample(i), data.views, params, tr);
        softmax_cross_entropy(tr.logits.data(), params.cfg.classes, 0, probs.data());
        PredictionRecord r;
        r.id = samples[i].id;
        r.true_label = samples[i].label;
        r.predicted_label = predict_label(tr.logits);
        r.scores = probs;
        r.embedding = tr.pooled;
        out.push_back(std::move(r));
    }
    return out;
}

// ---- experiment suite -------------------------------------------------------

SuiteConfig make_default_suite_config() {
    SuiteConfig cfg;
    cfg.point_train.batch = 32;
    cfg.point_train.adam.lr = 1e-4;
    cfg.view_train.batch = 64;
    cfg.view_train.adam.lr = 1e-3;
    return cfg;
}

namespace {

std::string suite_config_text(const SuiteConfig& cfg) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "side=%d probe=%d points=%d frac=%.4f pe=%d pb=%d plr=%g ve=%d vb=%d vlr=%g",
                  cfg.image_side, cfg.probe_res, cfg.n_points, cfg.train_fraction,
                  cfg.point_train.epochs, cfg.point_train.batch, cfg.point_train.adam.lr,
                  cfg.view_train.epochs, cfg.view_train.batch, cfg.view_train.adam.lr);
    std::string text = buf;
    for (const std::string& e : cfg.exclusions) text += " -" + e;
    return text;
}

struct CasePlan {
    std::string name;
    std::string input_label;
    ViewStrategy strategy = ViewStrategy::Ring12;
    int degree = 0;     // 0 = ring (no neighborhood)
    bool views = true;  // false = point-set case
};

std::vector<CasePlan> case_plans() {
    return {
        {"ring12", "ring-12 views", ViewStrategy::Ring12, 0, true},
        {"ransac10", "plane-fit views (10 deg)", ViewStrategy::Ransac, 10, true},
        {"ransac40", "plane-fit views (40 deg)", ViewStrategy::Ransac, 40, true},
        {"acqrate10", "acquisition-rate views (10 deg)", ViewStrategy::AcqRate, 10, true},
        {"acqrate40", "acquisition-rate views (40 deg)", ViewStrategy::AcqRate, 40, true},
        {"points", "sampled point cloud", ViewStrategy::Ring12, 0, false},
    };
}

}  // namespace

SuiteResult run_experiment_suite(const SuiteConfig& cfg, std::ostream* log) {
    const Manifest manifest =
        load_manifest((fs::path(cfg.corpus_dir) / "manifest.csv").string(),
                      (fs::path(cfg.corpus_dir) / "taxonomy.txt").string());
    const Taxonomy& taxonomy = manifest.taxonomy;
    SplitConfig split_cfg;
    split_cfg.train_fraction = cfg.train_fraction;
    split_cfg.seed = derive_seed(cfg.seed, 100);
    const SplitResult split = stratified_split(manifest, split_cfg);
    const int C = taxonomy.size();

    SuiteResult result;
    const auto plans = case_plans();
    for (std::size_t ci = 0; ci < plans.size(); ++ci) {
        const CasePlan& plan = plans[ci];
        SuiteCase item;
        item.name = plan.name;
        item.input_label = plan.input_label;
        item.network = plan.views ? "multi-view" : "point-set";
        if (log)
            *log << "[" << plan.name << "] preparing "
                 << (plan.views ? "view stacks" : "point sets") << "\n"
                 << std::flush;

        const std::uint64_t data_seed = derive_seed(cfg.seed, 10 + ci);
        const std::uint64_t init_seed = derive_seed(cfg.seed, 20 + ci);
        const std::uint64_t train_seed = derive_seed(cfg.seed, 30 + ci);
        std::vector<PredictionRecord> records;
        if (plan.views) {
            ViewPlanConfig vp;
            vp.strategy = plan.strategy;
            vp.degree = plan.degree;
            vp.probe.width = cfg.probe_res;
            vp.probe.height = cfg.probe_res;
            const ViewDataset train =
                make_view_dataset(split.train.samples, cfg.corpus_dir, vp, cfg.image_side, data_seed);
            const ViewDataset val =
                make_view_dataset(split.val.samples, cfg.corpus_dir, vp, cfg.image_side, data_seed);
            MvcnnConfig mc;
            mc.side = cfg.image_side;
            mc.classes = C;
            auto params = init_mvcnn<float>(mc, init_seed);
            TrainConfig tc = cfg.view_train;
            tc.seed = train_seed;
            if (log) {
                tc.on_epoch = [&](int epoch, const EpochStats& st) {
                    *log << "[" << plan.name << "] epoch " << epoch
                         << " train_loss=" << st.train_loss << " val_acc=" << st.val_accuracy
                         << "\n"
                         << std::flush;
                };
            }
            item.history = train_mvcnn(params, train, val, tc);
            records = evaluate_mvcnn(params, split.val.samples, val);
        } else {
            const PointDataset train =
                make_point_dataset(split.train.samples, cfg.corpus_dir, cfg.n_points, data_seed);
            const PointDataset val =
                make_point_dataset(split.val.samples, cfg.corpus_dir, cfg.n_points, data_seed);
            PointNetConfig pc;
            pc.classes = C;
            auto params = init_pointnet<float>(pc, init_seed);
            TrainConfig tc = cfg.point_train;
            tc.seed = train_seed;
            if (log) {
                tc.on_epoch = [&](int epoch, const EpochStats& st) {
                    *log << "[" << plan.name << "] epoch " << epoch
                         << " train_loss=" << st.train_loss << " val_acc=" << st.val_accuracy
                         << "\n"
                         << std::flush;
                };
            }
            item.history = train_pointnet(params, train, val, tc);
            records = evaluate_pointnet(params, split.val.samples, val);
        }

        item.report = build_report(records, taxonomy, {}, cfg.metric);
        if (!cfg.exclusions.empty())
            item.excluded_report = build_report(records, taxonomy, cfg.exclusions, cfg.metric);
        if (log)
            *log << "[" << plan.name << "] overall=" << item.report.overall_accuracy
                 << " class=" << item.report.class_accuracy << " map=" << item.report.map
                 << "\n"
                 << std::flush;
        result.cases.push_back(std::move(item));
    }
    return result;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string summary_table(const SuiteResult& result, bool excluded) {
    std::string text = "input,network,overall_accuracy,class_accuracy,map\n";
    for (const SuiteCase& c : result.cases) {
        const EvalReport& r = excluded ? c.excluded_report : c.report;
        text += c.input_label + "," + c.network + "," + fmt6(r.overall_accuracy) + "," +
                fmt6(r.class_accuracy) + "," + fmt6(r.map) + "\n";
    }
    return text;
}

}  // namespace

void write_suite_reports(const SuiteResult& result, const SuiteConfig& cfg,
                         const Taxonomy& taxonomy) {
    fs::create_directories(cfg.out_dir);
    const std::string header = "# " + artifact_header(cfg.seed, suite_config_text(cfg)) + "\n";

    write_text(fs::path(cfg.out_dir) / "summary.csv", header + summary_table(result, false));
    if (!cfg.exclusions.empty())
        write_text(fs::path(cfg.out_dir) / "summary_excluded.csv",
                   header + summary_table(result, true));

    // classes x cases accuracy table
    std::string table = "class";
    for (const SuiteCase& c : result.cases) table += "," + c.name;
    table += "\n";
    for (int cls = 0; cls < taxonomy.size(); ++cls) {
        table += taxonomy.label(cls);
        for (const SuiteCase& c : result.cases) {
            const bool empty =
                std::find(c.report.empty_classes.begin(), c.report.empty_classes.end(), cls) !=
                c.report.empty_classes.end();
            table += ",";
            if (!empty) table += fmt6(c.report.per_class_accuracy[cls]);
        }
        table += "\n";
    }
    write_text(fs::path(cfg.out_dir) / "class_accuracy.csv", header + table);

    for (const SuiteCase& c : result.cases) {
        write_text(fs::path(cfg.out_dir) / ("pr_" + c.name + ".csv"),
                   header + format_pr_curve(c.report.pr_curve));
        std::string per_class = "class,rank,recall,precision\n";
        for (int cls = 0; cls < taxonomy.size(); ++cls) {
            for (const PrPoint& p : c.report.class_pr[cls]) {
                per_class += taxonomy.label(cls) + "," + std::to_string(p.rank) + "," +
                             fmt6(p.recall) + "," + fmt6(p.precision) + "\n";
            }
        }
        write_text(fs::path(cfg.out_dir) / ("pr_" + c.name + "_classes.csv"),
                   header + per_class);
    }
}

}  // namespace fitrec
