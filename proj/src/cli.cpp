#include "fitrec/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fitrec/dataset.hpp"
#include "fitrec/errors.hpp"
#include "fitrec/eval.hpp"
#include "fitrec/pipeline.hpp"
#include "fitrec/plot.hpp"
#include "fitrec/renderer.hpp"
#include "fitrec/rng.hpp"
#include "fitrec/synth.hpp"
#include "fitrec/train.hpp"

namespace fitrec {
namespace {

namespace fs = std::filesystem;

// Post-parse validation problems are usage errors (exit 1), not data errors.
struct UsageFailure {
    std::string msg;
};

std::string fmtg(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%g", v);
    return b;
}

std::string fmt6(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.6f", v);
    return b;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

void print_resolved(const std::string& name, const KvList& kv) {
    std::cout << name << ": resolved config\n";
    for (const auto& [k, v] : kv) std::cout << "  " << k << " = " << v << "\n";
}

// stable "k=v k=v ..." string; its hash is the artifact config digest
std::string config_text(const KvList& kv) {
    std::string s;
    for (const auto& [k, v] : kv) {
        if (!s.empty()) s += ' ';
        s += k;
        s += '=';
        s += v;
    }
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

Manifest load_corpus(const std::string& dir) {
    return load_manifest((fs::path(dir) / "manifest.csv").string(),
                         (fs::path(dir) / "taxonomy.txt").string());
}

std::vector<Sample> pick_samples(const Manifest& m, const std::string& split,
                                 double train_fraction, std::uint64_t seed) {
    if (split == "all") return m.samples;
    SplitResult sr = stratified_split(m, {train_fraction, derive_seed(seed, 100)});
    return split == "train" ? sr.train.samples : sr.val.samples;
}

std::vector<Sample> filter_ids(const std::vector<Sample>& samples,
                               const std::vector<std::string>& ids) {
    if (ids.empty()) return samples;
    std::vector<Sample> out;
    for (const std::string& id : ids) {
        auto it = std::find_if(samples.begin(), samples.end(),
                               [&](const Sample& s) { return s.id == id; });
        if (it == samples.end()) throw Error("unknown cloud id: " + id);
        out.push_back(*it);
    }
    return out;
}

ViewPlanConfig make_plan(const std::string& strategy, int degree, int probe_res) {
    ViewPlanConfig p;
    p.strategy = parse_view_strategy(strategy);
    p.degree = degree;
    p.probe.width = probe_res;
    p.probe.height = probe_res;
    return p;
}

Distance parse_metric(const std::string& s) {
    if (s == "euclidean") return Distance::Euclidean;
    if (s == "cosine") return Distance::Cosine;
    throw ParseError("unknown metric: " + s);
}

double display_distance(const std::vector<float>& a, const std::vector<float>& b,
                        Distance metric) {
    if (metric == Distance::Euclidean) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            s += d * d;
        }
        return std::sqrt(s);
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) return 2.0;
    return 1.0 - dot / std::sqrt(na * nb);
}

// ---- gen --------------------------------------------------------------------

struct GenOpts {
    std::string config_path, out;
    std::uint64_t seed = 0;
    int count = 0;
    std::vector<std::string> classes;  // "Name=COUNT"
    double jitter_lo = 0, jitter_hi = 0, distance_lo = 0, distance_hi = 0;
    bool pose_randomization = true, occlusion = true;
    double noise_sigma = 0, reference_density = 0, bin_deg = 0, outlier_fraction = 0;
    CLI::Option *o_seed = nullptr, *o_count = nullptr, *o_out = nullptr,
                *o_jitter_lo = nullptr, *o_jitter_hi = nullptr,
                *o_distance_lo = nullptr, *o_distance_hi = nullptr,
                *o_pose = nullptr, *o_occlusion = nullptr, *o_noise = nullptr,
                *o_density = nullptr, *o_bin = nullptr, *o_outlier = nullptr;
};

CLI::App* add_gen(CLI::App& app, GenOpts& o) {
    CLI::App* c = app.add_subcommand("gen", "generate a labeled synthetic scan corpus");
    c->add_option("--config", o.config_path, "JSON corpus config; flags override its keys")
        ->envname("FITREC_CONFIG");
    o.o_out = c->add_option("--out", o.out, "output directory (config key out_dir)");
    o.o_seed = c->add_option("--seed", o.seed, "master seed (config key seed)");
    o.o_count = c->add_option("--count", o.count, "uniform per-class sample count");
    c->add_option("--class", o.classes,
                  "Name=COUNT; defines the class list (repeatable, config key classes)");
    o.o_jitter_lo = c->add_option("--jitter-lo", o.jitter_lo,
                                  "dimension scale lower bound (dimension_jitter[0])");
    o.o_jitter_hi = c->add_option("--jitter-hi", o.jitter_hi,
                                  "dimension scale upper bound (dimension_jitter[1])");
    o.o_distance_lo = c->add_option("--distance-lo", o.distance_lo,
                                    "scanner distance lower bound (distance_range[0])");
    o.o_distance_hi = c->add_option("--distance-hi", o.distance_hi,
                                    "scanner distance upper bound (distance_range[1])");
    o.o_pose = c->add_option("--pose-randomization", o.pose_randomization,
                             "random orientation per sample");
    o.o_occlusion = c->add_option("--occlusion", o.occlusion,
                                  "hide self-occluded surface points");
    o.o_noise = c->add_option("--noise-sigma", o.noise_sigma, "range noise, meters");
    o.o_density = c->add_option("--reference-density", o.reference_density,
                                "points per unit area at 1 m");
    o.o_bin = c->add_option("--bin-deg", o.bin_deg, "occlusion buffer bin size, degrees");
    o.o_outlier = c->add_option("--outlier-fraction", o.outlier_fraction,
                                "fraction of points relocated as outliers");
    return c;
}

int run_gen(const GenOpts& o) {
    CorpusConfig cfg;
    if (!o.config_path.empty()) cfg = load_corpus_config(o.config_path);
    if (o.o_seed->count()) cfg.seed = o.seed;
    if (!o.classes.empty()) {
        std::vector<std::string> labels;
        std::vector<int> counts;
        for (const std::string& entry : o.classes) {
            const std::size_t eq = entry.rfind('=');
            if (eq == std::string::npos || eq == 0)
                throw UsageFailure{"--class expects Name=COUNT, got: " + entry};
            labels.push_back(entry.substr(0, eq));
            int n = -1;
            try {
                n = std::stoi(entry.substr(eq + 1));
            } catch (const std::exception&) {
                throw UsageFailure{"--class expects an integer count, got: " + entry};
            }
            if (n < 0) throw UsageFailure{"--class count must be >= 0: " + entry};
            counts.push_back(n);
        }
        cfg.taxonomy = Taxonomy(labels);
        cfg.counts = counts;
    }
    if (o.o_count->count()) {
        if (o.count < 0) throw UsageFailure{"--count must be >= 0"};
        cfg.counts.assign(static_cast<std::size_t>(cfg.taxonomy.size()), o.count);
    }
    if (o.o_jitter_lo->count()) cfg.jitter_lo = o.jitter_lo;
    if (o.o_jitter_hi->count()) cfg.jitter_hi = o.jitter_hi;
    if (o.o_distance_lo->count()) cfg.distance_lo = o.distance_lo;
    if (o.o_distance_hi->count()) cfg.distance_hi = o.distance_hi;
    if (o.o_pose->count()) cfg.pose_randomization = o.pose_randomization;
    if (o.o_occlusion->count()) cfg.scan.occlusion = o.occlusion;
    if (o.o_noise->count()) cfg.scan.noise_sigma = o.noise_sigma;
    if (o.o_density->count()) cfg.scan.reference_density = o.reference_density;
    if (o.o_bin->count()) cfg.scan.bin_deg = o.bin_deg;
    if (o.o_outlier->count()) cfg.scan.outlier_fraction = o.outlier_fraction;
    if (o.o_out->count()) cfg.out_dir = o.out;
    if (cfg.out_dir.empty())
        throw UsageFailure{"--out (or config key out_dir) is required"};
    bool any = false;
    for (int c : cfg.counts) any = any || c > 0;
    if (!any)
        throw UsageFailure{"no samples requested; pass --count N or --class Name=N"};

    const std::string canon = format_corpus_config(cfg);
    const std::string header = artifact_header(cfg.seed, canon);
    cfg.header_comment = header;

    std::cout << "gen: resolved config\n"
              << canon << "  out = " << cfg.out_dir << "\n  seed = " << cfg.seed
              << "\n";
    const Manifest m = build_synthetic_corpus(cfg);
    write_file((fs::path(cfg.out_dir) / "corpus_config.json").string(),
               "// " + header + "\n" + canon);
    std::cout << "wrote " << m.samples.size() << " clouds ("
              << m.taxonomy.size() << " classes) to " << cfg.out_dir << "\n";
    return 0;
}

// ---- views ------------------------------------------------------------------

struct ViewsOpts {
    std::string corpus, out, strategy = "ring12";
    int degree = 10, probe_res = 227;
    std::uint64_t seed = 1;
    std::vector<std::string> ids;
};

CLI::App* add_views(CLI::App& app, ViewsOpts& o) {
    CLI::App* c = app.add_subcommand("views", "plan camera poses and export them as CSV");
    c->add_option("--corpus", o.corpus, "corpus directory (manifest.csv, taxonomy.txt)")
        ->required();
    c->add_option("--out", o.out, "output directory for <id>_views.csv files")->required();
    c->add_option("--strategy", o.strategy, "view selection strategy")
        ->check(CLI::IsMember({"ring12", "ransac", "acqrate"}));
    c->add_option("--degree", o.degree, "neighborhood step, degrees")
        ->check(CLI::IsMember({10, 40}));
    c->add_option("--probe-res", o.probe_res, "probe render resolution for rate scoring");
    c->add_option("--seed", o.seed, "seed for the per-cloud plane-fit draws");
    c->add_option("--id", o.ids, "restrict to these cloud ids (repeatable)");
    return c;
}

int run_views(const ViewsOpts& o) {
    const Manifest m = load_corpus(o.corpus);
    const std::vector<Sample> samples = filter_ids(m.samples, o.ids);
    // paths stay out of the digest so a rerun elsewhere writes identical bytes
    const KvList params{{"strategy", o.strategy},
                        {"degree", std::to_string(o.degree)},
                        {"probe_res", std::to_string(o.probe_res)}};
    KvList kv{{"corpus", o.corpus}, {"out", o.out}};
    kv.insert(kv.end(), params.begin(), params.end());
    kv.push_back({"seed", std::to_string(o.seed)});
    print_resolved("views", kv);
    const std::string header = artifact_header(o.seed, config_text(params));
    ensure_dir(o.out);

    ViewPlanConfig plan = make_plan(o.strategy, o.degree, o.probe_res);
    std::size_t n_poses = 0;
    for (const Sample& s : samples) {
        const PointCloud cloud =
            read_point_cloud((fs::path(o.corpus) / s.path).string());
        const PointCloud norm = normalize_unit_sphere(cloud).first;
        plan.ransac.seed = derive_seed(o.seed, fnv1a64(s.id));
        const std::vector<CameraPose> poses = plan_views(norm, plan);
        std::string text = "# " + header + "\ntheta_deg,azimuth_deg\n";
        for (const CameraPose& p : poses)
            text += fmt6(p.elevation_deg) + "," + fmt6(p.azimuth_deg) + "\n";
        write_file((fs::path(o.out) / (s.id + "_views.csv")).string(), text);
        n_poses += poses.size();
    }
    std::cout << "wrote " << n_poses << " poses for " << samples.size()
              << " clouds to " << o.out << "\n";
    return 0;
}

// ---- render -----------------------------------------------------------------

struct RenderOpts {
    std::string corpus, out, strategy = "ring12";
    int degree = 10, res = 227, probe_res = 227;
    std::uint64_t seed = 1;
    std::vector<std::string> ids;
};

CLI::App* add_render(CLI::App& app, RenderOpts& o) {
    CLI::App* c = app.add_subcommand("render", "render depth images for planned views");
    c->add_option("--corpus", o.corpus, "corpus directory")->required();
    c->add_option("--out", o.out, "output directory for <id>_v<k>.pgm files")->required();
    c->add_option("--strategy", o.strategy, "view selection strategy")
        ->check(CLI::IsMember({"ring12", "ransac", "acqrate"}));
    c->add_option("--degree", o.degree, "neighborhood step, degrees")
        ->check(CLI::IsMember({10, 40}));
    c->add_option("--res", o.res, "output image resolution (square)");
    c->add_option("--probe-res", o.probe_res, "probe render resolution for rate scoring");
    c->add_option("--seed", o.seed, "seed for the per-cloud plane-fit draws");
    c->add_option("--id", o.ids, "restrict to these cloud ids (repeatable)");
    return c;
}

int run_render(const RenderOpts& o) {
    if (o.res < 1) throw UsageFailure{"--res must be >= 1"};
    const Manifest m = load_corpus(o.corpus);
    const std::vector<Sample> samples = filter_ids(m.samples, o.ids);
    const KvList params{{"strategy", o.strategy},
                        {"degree", std::to_string(o.degree)},
                        {"res", std::to_string(o.res)},
                        {"probe_res", std::to_string(o.probe_res)}};
    KvList kv{{"corpus", o.corpus}, {"out", o.out}};
    kv.insert(kv.end(), params.begin(), params.end());
    kv.push_back({"seed", std::to_string(o.seed)});
    print_resolved("render", kv);
    const std::string header = artifact_header(o.seed, config_text(params));
    ensure_dir(o.out);

    ViewPlanConfig plan = make_plan(o.strategy, o.degree, o.probe_res);
    RenderConfig rc;
    rc.width = o.res;
    rc.height = o.res;
    std::size_t n_images = 0;
    for (const Sample& s : samples) {
        const PointCloud cloud =
            read_point_cloud((fs::path(o.corpus) / s.path).string());
        const PointCloud norm = normalize_unit_sphere(cloud).first;
        plan.ransac.seed = derive_seed(o.seed, fnv1a64(s.id));
        const std::vector<CameraPose> poses = plan_views(norm, plan);
        const std::vector<DepthImage> images = render_view_set(norm, poses, rc);
        for (std::size_t k = 0; k < images.size(); ++k) {
            const std::string name = s.id + "_v" + std::to_string(k) + ".pgm";
            write_pgm(images[k], (fs::path(o.out) / name).string(), header);
        }
        n_images += images.size();
    }
    std::cout << "wrote " << n_images << " images for " << samples.size()
              << " clouds to " << o.out << "\n";
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
    std::string corpus, net, out, history;
    std::uint64_t seed = 1;
    int epochs = 30, batch = 0;
    double lr = 0;
    double train_fraction = 0.8, stop = -1.0;
    int points = 2048, side = 64, probe_res = 227, degree = 10;
    std::string strategy = "ring12";
    int h1 = 64, h2 = 128, feat = 256, head = 128;
    bool tnet = false;
    int conv1 = 8, conv2 = 16, kernel = 5, feature = 128;
    CLI::Option *o_batch = nullptr, *o_lr = nullptr;
};

CLI::App* add_train(CLI::App& app, TrainOpts& o) {
    CLI::App* c = app.add_subcommand("train", "train a classifier and save a checkpoint");
    c->add_option("--corpus", o.corpus, "corpus directory")->required();
    c->add_option("--net", o.net, "network family")
        ->check(CLI::IsMember({"point-set", "multi-view"}))
        ->required();
    c->add_option("--out", o.out, "checkpoint output path")->required();
    c->add_option("--history", o.history, "optional per-epoch metrics CSV");
    c->add_option("--seed", o.seed, "master seed (split, data, init, shuffling)");
    c->add_option("--epochs", o.epochs, "epoch budget");
    o.o_batch = c->add_option("--batch", o.batch,
                              "minibatch size (default 32 point-set, 64 multi-view)");
    o.o_lr = c->add_option("--lr", o.lr,
                           "learning rate (default 1e-4 point-set, 1e-3 multi-view)");
    c->add_option("--train-fraction", o.train_fraction, "per-class train share");
    c->add_option("--stop-at-val-accuracy", o.stop,
                  "stop early once validation accuracy reaches this");
    c->add_option("--points", o.points, "points per cloud (point-set)");
    c->add_option("--side", o.side, "input image side (multi-view)");
    c->add_option("--strategy", o.strategy, "view selection strategy (multi-view)")
        ->check(CLI::IsMember({"ring12", "ransac", "acqrate"}));
    c->add_option("--degree", o.degree, "neighborhood step, degrees (multi-view)")
        ->check(CLI::IsMember({10, 40}));
    c->add_option("--probe-res", o.probe_res, "probe resolution for rate scoring");
    c->add_option("--h1", o.h1, "point-set: first per-point width");
    c->add_option("--h2", o.h2, "point-set: second per-point width");
    c->add_option("--feat", o.feat, "point-set: pooled feature width");
    c->add_option("--head", o.head, "point-set: classifier hidden width");
    c->add_flag("--tnet", o.tnet, "point-set: learn an input alignment transform");
    c->add_option("--conv1", o.conv1, "multi-view: first conv channels");
    c->add_option("--conv2", o.conv2, "multi-view: second conv channels");
    c->add_option("--kernel", o.kernel, "multi-view: conv kernel size");
    c->add_option("--feature", o.feature, "multi-view: pooled feature width");
    return c;
}

int run_train(const TrainOpts& o) {
    const Manifest m = load_corpus(o.corpus);
    const SplitResult sr =
        stratified_split(m, {o.train_fraction, derive_seed(o.seed, 100)});
    const bool pointset = o.net == "point-set";
    const int batch = o.o_batch->count() ? o.batch : (pointset ? 32 : 64);
    const double lr = o.o_lr->count() ? o.lr : (pointset ? 1e-4 : 1e-3);

    KvList params{{"net", o.net},
                  {"epochs", std::to_string(o.epochs)},
                  {"batch", std::to_string(batch)},
                  {"lr", fmtg(lr)},
                  {"train_fraction", fmtg(o.train_fraction)},
                  {"stop_at_val_accuracy", fmtg(o.stop)}};
    if (pointset) {
        params.push_back({"points", std::to_string(o.points)});
        params.push_back({"h1", std::to_string(o.h1)});
        params.push_back({"h2", std::to_string(o.h2)});
        params.push_back({"feat", std::to_string(o.feat)});
        params.push_back({"head", std::to_string(o.head)});
        params.push_back({"tnet", o.tnet ? "1" : "0"});
    } else {
        params.push_back({"strategy", o.strategy});
        params.push_back({"degree", std::to_string(o.degree)});
        params.push_back({"side", std::to_string(o.side)});
        params.push_back({"probe_res", std::to_string(o.probe_res)});
        params.push_back({"conv1", std::to_string(o.conv1)});
        params.push_back({"conv2", std::to_string(o.conv2)});
        params.push_back({"kernel", std::to_string(o.kernel)});
        params.push_back({"feature", std::to_string(o.feature)});
    }
    KvList kv{{"corpus", o.corpus}, {"out", o.out}};
    kv.insert(kv.end(), params.begin(), params.end());
    kv.push_back({"seed", std::to_string(o.seed)});
    print_resolved("train", kv);
    const std::string header = artifact_header(o.seed, config_text(params));

    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.batch = batch;
    tc.adam.lr = lr;
    tc.seed = derive_seed(o.seed, 3);
    tc.stop_at_val_accuracy = o.stop;
    tc.on_epoch = [](int epoch, const EpochStats& st) {
        std::cout << "epoch " << epoch << " train_loss=" << fmt6(st.train_loss)
                  << " val_loss=" << fmt6(st.val_loss)
                  << " val_acc=" << fmt6(st.val_accuracy) << "\n"
                  << std::flush;
    };

    const fs::path parent = fs::path(o.out).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());

    std::vector<EpochStats> history;
    if (pointset) {
        const std::uint64_t ds = derive_seed(o.seed, 1);
        const PointDataset train =
            make_point_dataset(sr.train.samples, o.corpus, o.points, ds);
        const PointDataset val =
            make_point_dataset(sr.val.samples, o.corpus, o.points, ds);
        PointNetConfig pc;
        pc.h1 = o.h1;
        pc.h2 = o.h2;
        pc.feat = o.feat;
        pc.head = o.head;
        pc.classes = m.taxonomy.size();
        pc.use_tnet = o.tnet;
        auto params = init_pointnet<float>(pc, derive_seed(o.seed, 2));
        history = train_pointnet(params, train, val, tc);
        save_checkpoint(o.out, params, header);
    } else {
        const ViewPlanConfig plan = make_plan(o.strategy, o.degree, o.probe_res);
        const std::uint64_t ds = derive_seed(o.seed, 1);
        const ViewDataset train =
            make_view_dataset(sr.train.samples, o.corpus, plan, o.side, ds);
        const ViewDataset val =
            make_view_dataset(sr.val.samples, o.corpus, plan, o.side, ds);
        MvcnnConfig mc;
        mc.side = o.side;
        mc.conv1 = o.conv1;
        mc.conv2 = o.conv2;
        mc.kernel = o.kernel;
        mc.feature = o.feature;
        mc.classes = m.taxonomy.size();
        auto params = init_mvcnn<float>(mc, derive_seed(o.seed, 2));
        history = train_mvcnn(params, train, val, tc);
        save_checkpoint(o.out, params, header);
    }

    if (!o.history.empty()) {
        std::string text = "# " + header + "\nepoch,train_loss,val_loss,val_accuracy\n";
        for (std::size_t i = 0; i < history.size(); ++i)
            text += std::to_string(i) + "," + fmt6(history[i].train_loss) + "," +
                    fmt6(history[i].val_loss) + "," + fmt6(history[i].val_accuracy) +
                    "\n";
        write_file(o.history, text);
    }
    if (history.empty())
        std::cout << "saved untrained checkpoint to " << o.out << "\n";
    else
        std::cout << "saved checkpoint to " << o.out << " (epochs run "
                  << history.size() << ", final val_acc "
                  << fmt6(history.back().val_accuracy) << ")\n";
    return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
    std::string corpus, checkpoint, out;
    std::uint64_t seed = 1;
    std::string split = "val";
    double train_fraction = 0.8;
    std::string metric = "euclidean";
    std::vector<std::string> excludes;
    int points = 2048, degree = 10, probe_res = 227;
    std::string strategy = "ring12";
};

void add_eval_common(CLI::App* c, EvalOpts& o) {
    c->add_option("--corpus", o.corpus, "corpus directory")->required();
    c->add_option("--checkpoint", o.checkpoint, "trained model file")->required();
    c->add_option("--seed", o.seed, "seed used when the model was trained");
    c->add_option("--split", o.split, "samples to evaluate")
        ->check(CLI::IsMember({"train", "val", "all"}));
    c->add_option("--train-fraction", o.train_fraction, "per-class train share");
    c->add_option("--metric", o.metric, "retrieval distance")
        ->check(CLI::IsMember({"euclidean", "cosine"}));
    c->add_option("--points", o.points, "points per cloud (point-set checkpoints)");
    c->add_option("--strategy", o.strategy, "view strategy (multi-view checkpoints)")
        ->check(CLI::IsMember({"ring12", "ransac", "acqrate"}));
    c->add_option("--degree", o.degree, "neighborhood step, degrees")
        ->check(CLI::IsMember({10, 40}));
    c->add_option("--probe-res", o.probe_res, "probe resolution for rate scoring");
}

std::vector<PredictionRecord> records_for(const EvalOpts& o,
                                          const std::vector<Sample>& samples) {
    const std::uint64_t ds = derive_seed(o.seed, 1);
    const int kind = checkpoint_kind(o.checkpoint);
    if (kind == kCheckpointPointNet) {
        const auto params = load_pointnet_checkpoint(o.checkpoint);
        const PointDataset data =
            make_point_dataset(samples, o.corpus, o.points, ds);
        return evaluate_pointnet(params, samples, data);
    }
    const auto params = load_mvcnn_checkpoint(o.checkpoint);
    const ViewPlanConfig plan = make_plan(o.strategy, o.degree, o.probe_res);
    const ViewDataset data =
        make_view_dataset(samples, o.corpus, plan, params.cfg.side, ds);
    return evaluate_mvcnn(params, samples, data);
}

KvList eval_params(const EvalOpts& o) {
    return {{"split", o.split},
            {"train_fraction", fmtg(o.train_fraction)},
            {"metric", o.metric},
            {"points", std::to_string(o.points)},
            {"strategy", o.strategy},
            {"degree", std::to_string(o.degree)},
            {"probe_res", std::to_string(o.probe_res)}};
}

CLI::App* add_eval(CLI::App& app, EvalOpts& o) {
    CLI::App* c = app.add_subcommand(
        "eval", "classification and retrieval report for a checkpoint");
    add_eval_common(c, o);
    c->add_option("--out", o.out, "report output directory")->required();
    c->add_option("--exclude", o.excludes,
                  "drop this class before computing metrics (repeatable)");
    return c;
}

int run_eval(const EvalOpts& o) {
    const Manifest m = load_corpus(o.corpus);
    const std::vector<Sample> samples =
        pick_samples(m, o.split, o.train_fraction, o.seed);
    KvList params = eval_params(o);
    std::string excl;
    for (const std::string& e : o.excludes) excl += (excl.empty() ? "" : ";") + e;
    params.push_back({"exclude", excl.empty() ? "(none)" : excl});
    KvList kv{{"corpus", o.corpus}, {"checkpoint", o.checkpoint}, {"out", o.out}};
    kv.insert(kv.end(), params.begin(), params.end());
    kv.push_back({"seed", std::to_string(o.seed)});
    print_resolved("eval", kv);
    const std::string header = artifact_header(o.seed, config_text(params));

    const std::vector<PredictionRecord> records = records_for(o, samples);
    const EvalReport report =
        build_report(records, m.taxonomy, o.excludes, parse_metric(o.metric));

    ensure_dir(o.out);
    const std::string hline = "# " + header + "\n";
    write_file((fs::path(o.out) / "summary.csv").string(),
               hline + format_report_summary(report));
    write_file((fs::path(o.out) / "class_table.csv").string(),
               hline + format_class_table(report, m.taxonomy));
    write_file((fs::path(o.out) / "pr.csv").string(),
               hline + format_pr_curve(report.pr_curve));
    {
        std::string text = hline + "class,rank,recall,precision\n";
        for (int c = 0; c < report.classes; ++c)
            for (const PrPoint& p : report.class_pr[static_cast<std::size_t>(c)])
                text += m.taxonomy.label(c) + "," + std::to_string(p.rank) + "," +
                        fmt6(p.recall) + "," + fmt6(p.precision) + "\n";
        write_file((fs::path(o.out) / "pr_classes.csv").string(), text);
    }
    {
        std::string text = hline + "class";
        for (int c = 0; c < report.classes; ++c) text += "," + m.taxonomy.label(c);
        text += "\n";
        for (int r = 0; r < report.classes; ++r) {
            text += m.taxonomy.label(r);
            for (int c = 0; c < report.classes; ++c)
                text += "," + std::to_string(
                                  report.confusion[static_cast<std::size_t>(r)]
                                                  [static_cast<std::size_t>(c)]);
            text += "\n";
        }
        write_file((fs::path(o.out) / "confusion.csv").string(), text);
    }
    std::cout << format_report_summary(report);
    std::cout << "wrote report files to " << o.out << "\n";
    return 0;
}

// ---- retrieve ---------------------------------------------------------------

struct RetrieveOpts {
    EvalOpts base;
    std::string query, out;
    int k = 10;
};

CLI::App* add_retrieve(CLI::App& app, RetrieveOpts& o) {
    CLI::App* c =
        app.add_subcommand("retrieve", "rank the corpus against one query cloud");
    o.base.split = "all";
    add_eval_common(c, o.base);
    c->add_option("--query", o.query, "query cloud id")->required();
    c->add_option("-k,--k", o.k, "number of results");
    c->add_option("--out", o.out, "optional CSV output path");
    return c;
}

int run_retrieve(const RetrieveOpts& o) {
    if (o.k < 1) throw UsageFailure{"-k must be >= 1"};
    const Manifest m = load_corpus(o.base.corpus);
    const std::vector<Sample> samples =
        pick_samples(m, o.base.split, o.base.train_fraction, o.base.seed);
    KvList params = eval_params(o.base);
    params.push_back({"query", o.query});
    params.push_back({"k", std::to_string(o.k)});
    KvList kv{{"corpus", o.base.corpus}, {"checkpoint", o.base.checkpoint}};
    kv.insert(kv.end(), params.begin(), params.end());
    kv.push_back({"seed", std::to_string(o.base.seed)});
    print_resolved("retrieve", kv);
    const std::string header = artifact_header(o.base.seed, config_text(params));

    const std::vector<PredictionRecord> records = records_for(o.base, samples);
    const PredictionRecord* query = nullptr;
    for (const PredictionRecord& r : records)
        if (r.id == o.query) query = &r;
    if (!query) throw Error("query id not in the evaluated split: " + o.query);

    const std::vector<std::string> ids = retrieve_similar(
        query->embedding, records, o.k, query->id, parse_metric(o.base.metric));

    std::string text = "# " + header + "\nrank,id,label,distance\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const PredictionRecord* hit = nullptr;
        for (const PredictionRecord& r : records)
            if (r.id == ids[i]) hit = &r;
        if (!hit) throw Error("retrieval returned an id missing from the records");
        const double d = display_distance(query->embedding, hit->embedding,
                                          parse_metric(o.base.metric));
        text += std::to_string(i + 1) + "," + hit->id + "," +
                m.taxonomy.label(hit->true_label) + "," + fmt6(d) + "\n";
    }
    std::cout << text.substr(text.find('\n') + 1);  // body without the header line
    if (!o.out.empty()) {
        const fs::path parent = fs::path(o.out).parent_path();
        if (!parent.empty()) ensure_dir(parent.string());
        write_file(o.out, text);
    }
    return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportOpts {
    std::string config_path, corpus, out;
    int image_side = 64, probe_res = 227, n_points = 2048;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
    std::string metric = "euclidean";
    std::vector<std::string> excludes;
    int point_epochs = 30, point_batch = 32, view_epochs = 30, view_batch = 64;
    double point_lr = 1e-4, view_lr = 1e-3, stop = -1.0;
    CLI::Option *o_corpus = nullptr, *o_out = nullptr, *o_side = nullptr,
                *o_probe = nullptr, *o_points = nullptr, *o_frac = nullptr,
                *o_seed = nullptr, *o_metric = nullptr, *o_exclude = nullptr,
                *o_pe = nullptr, *o_pb = nullptr, *o_pl = nullptr, *o_ve = nullptr,
                *o_vb = nullptr, *o_vl = nullptr, *o_stop = nullptr;
};

CLI::App* add_report(CLI::App& app, ReportOpts& o) {
    CLI::App* c = app.add_subcommand(
        "report", "train and evaluate all six experiment configurations");
    c->add_option("--config", o.config_path, "JSON suite config; flags override its keys")
        ->envname("FITREC_CONFIG");
    o.o_corpus = c->add_option("--corpus", o.corpus, "corpus directory (corpus_dir)");
    o.o_out = c->add_option("--out", o.out, "report output directory (out_dir)");
    o.o_side = c->add_option("--image-side", o.image_side, "network input image side");
    o.o_probe = c->add_option("--probe-res", o.probe_res, "probe resolution");
    o.o_points = c->add_option("--n-points", o.n_points, "points per cloud");
    o.o_frac = c->add_option("--train-fraction", o.train_fraction, "per-class train share");
    o.o_seed = c->add_option("--seed", o.seed, "master seed");
    o.o_metric = c->add_option("--metric", o.metric, "retrieval distance")
                     ->check(CLI::IsMember({"euclidean", "cosine"}));
    o.o_exclude = c->add_option("--exclude", o.excludes,
                                "class for the exclusion table (repeatable)");
    o.o_pe = c->add_option("--point-epochs", o.point_epochs, "point-set epoch budget");
    o.o_pb = c->add_option("--point-batch", o.point_batch, "point-set batch size");
    o.o_pl = c->add_option("--point-lr", o.point_lr, "point-set learning rate");
    o.o_ve = c->add_option("--view-epochs", o.view_epochs, "multi-view epoch budget");
    o.o_vb = c->add_option("--view-batch", o.view_batch, "multi-view batch size");
    o.o_vl = c->add_option("--view-lr", o.view_lr, "multi-view learning rate");
    o.o_stop = c->add_option("--stop-at-val-accuracy", o.stop,
                             "stop a case early at this validation accuracy");
    return c;
}

void apply_suite_json(const std::string& path, SuiteConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in, nullptr, true, true);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad JSON in ") + path + ": " + e.what());
    }
    cfg.corpus_dir = j.value("corpus_dir", cfg.corpus_dir);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.image_side = j.value("image_side", cfg.image_side);
    cfg.probe_res = j.value("probe_res", cfg.probe_res);
    cfg.n_points = j.value("n_points", cfg.n_points);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("metric")) cfg.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("exclusions"))
        cfg.exclusions = j["exclusions"].get<std::vector<std::string>>();
    cfg.point_train.epochs = j.value("point_epochs", cfg.point_train.epochs);
    cfg.point_train.batch = j.value("point_batch", cfg.point_train.batch);
    cfg.point_train.adam.lr = j.value("point_lr", cfg.point_train.adam.lr);
    cfg.view_train.epochs = j.value("view_epochs", cfg.view_train.epochs);
    cfg.view_train.batch = j.value("view_batch", cfg.view_train.batch);
    cfg.view_train.adam.lr = j.value("view_lr", cfg.view_train.adam.lr);
    if (j.contains("stop_at_val_accuracy")) {
        const double stop = j["stop_at_val_accuracy"].get<double>();
        cfg.point_train.stop_at_val_accuracy = stop;
        cfg.view_train.stop_at_val_accuracy = stop;
    }
}

int run_report(const ReportOpts& o) {
    SuiteConfig cfg = make_default_suite_config();
    if (!o.config_path.empty()) apply_suite_json(o.config_path, cfg);
    if (o.o_corpus->count()) cfg.corpus_dir = o.corpus;
    if (o.o_out->count()) cfg.out_dir = o.out;
    if (o.o_side->count()) cfg.image_side = o.image_side;
    if (o.o_probe->count()) cfg.probe_res = o.probe_res;
    if (o.o_points->count()) cfg.n_points = o.n_points;
    if (o.o_frac->count()) cfg.train_fraction = o.train_fraction;
    if (o.o_seed->count()) cfg.seed = o.seed;
    if (o.o_metric->count()) cfg.metric = parse_metric(o.metric);
    if (o.o_exclude->count()) cfg.exclusions = o.excludes;
    if (o.o_pe->count()) cfg.point_train.epochs = o.point_epochs;
    if (o.o_pb->count()) cfg.point_train.batch = o.point_batch;
    if (o.o_pl->count()) cfg.point_train.adam.lr = o.point_lr;
    if (o.o_ve->count()) cfg.view_train.epochs = o.view_epochs;
    if (o.o_vb->count()) cfg.view_train.batch = o.view_batch;
    if (o.o_vl->count()) cfg.view_train.adam.lr = o.view_lr;
    if (o.o_stop->count()) {
        cfg.point_train.stop_at_val_accuracy = o.stop;
        cfg.view_train.stop_at_val_accuracy = o.stop;
    }
    if (cfg.corpus_dir.empty())
        throw UsageFailure{"--corpus (or config key corpus_dir) is required"};
    if (cfg.out_dir.empty())
        throw UsageFailure{"--out (or config key out_dir) is required"};

    std::string excl;
    for (const std::string& e : cfg.exclusions) excl += (excl.empty() ? "" : ";") + e;
    const KvList kv{
        {"corpus", cfg.corpus_dir},
        {"out", cfg.out_dir},
        {"image_side", std::to_string(cfg.image_side)},
        {"probe_res", std::to_string(cfg.probe_res)},
        {"n_points", std::to_string(cfg.n_points)},
        {"train_fraction", fmtg(cfg.train_fraction)},
        {"metric", cfg.metric == Distance::Euclidean ? "euclidean" : "cosine"},
        {"exclude", excl.empty() ? "(none)" : excl},
        {"point_epochs", std::to_string(cfg.point_train.epochs)},
        {"point_batch", std::to_string(cfg.point_train.batch)},
        {"point_lr", fmtg(cfg.point_train.adam.lr)},
        {"view_epochs", std::to_string(cfg.view_train.epochs)},
        {"view_batch", std::to_string(cfg.view_train.batch)},
        {"view_lr", fmtg(cfg.view_train.adam.lr)},
        {"stop_at_val_accuracy", fmtg(cfg.point_train.stop_at_val_accuracy)},
        {"seed", std::to_string(cfg.seed)}};
    print_resolved("report", kv);

    const Manifest m = load_corpus(cfg.corpus_dir);
    const SuiteResult result = run_experiment_suite(cfg, &std::cout);
    write_suite_reports(result, cfg, m.taxonomy);

    std::cout << "input,network,overall_accuracy,class_accuracy,map\n";
    for (const SuiteCase& sc : result.cases)
        std::cout << sc.input_label << "," << sc.network << ","
                  << fmt6(sc.report.overall_accuracy) << ","
                  << fmt6(sc.report.class_accuracy) << "," << fmt6(sc.report.map)
                  << "\n";
    std::cout << "wrote report files to " << cfg.out_dir << "\n";
    return 0;
}

// ---- plot -------------------------------------------------------------------

struct PlotOpts {
    std::string in, out, title;
};

CLI::App* add_plot(CLI::App& app, PlotOpts& o) {
    CLI::App* c = app.add_subcommand(
        "plot", "draw precision/recall curves from a report CSV as SVG");
    c->add_option("--in", o.in, "pr.csv or pr_classes.csv file")->required();
    c->add_option("--out", o.out, "SVG output path")->required();
    c->add_option("--title", o.title, "plot title (default: input file stem)");
    return c;
}

int run_plot(const PlotOpts& o) {
    std::string title = o.title;
    if (title.empty()) title = fs::path(o.in).stem().string();

    // carry the source file's provenance line into the SVG
    std::string source_header;
    {
        std::ifstream in(o.in);
        if (!in) throw IoError("cannot open " + o.in);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                source_header = line.substr(line.find_first_not_of("# "));
                break;
            }
            break;
        }
    }

    std::vector<PlotSeries> series = load_pr_csv(o.in);
    if (series.size() == 1 && series[0].label.empty()) series[0].label = title;

    const KvList kv{{"in", o.in},
                    {"out", o.out},
                    {"title", title},
                    {"series", std::to_string(series.size())},
                    {"source header",
                     source_header.empty() ? "(none)" : source_header}};
    print_resolved("plot", kv);

    const fs::path parent = fs::path(o.out).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    write_file(o.out, render_pr_svg(series, title, source_header));
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{
        "fitting classification and retrieval pipeline: synthetic scans, "
        "view planning, depth rendering, compact networks, reports",
        "fitrec"};
    app.require_subcommand(1);

    GenOpts gen_o;
    ViewsOpts views_o;
    RenderOpts render_o;
    TrainOpts train_o;
    EvalOpts eval_o;
    RetrieveOpts retrieve_o;
    ReportOpts report_o;
    PlotOpts plot_o;
    CLI::App* c_gen = add_gen(app, gen_o);
    CLI::App* c_views = add_views(app, views_o);
    CLI::App* c_render = add_render(app, render_o);
    CLI::App* c_train = add_train(app, train_o);
    CLI::App* c_eval = add_eval(app, eval_o);
    CLI::App* c_retrieve = add_retrieve(app, retrieve_o);
    CLI::App* c_report = add_report(app, report_o);
    CLI::App* c_plot = add_plot(app, plot_o);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("fitrec");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (c_gen->parsed()) return run_gen(gen_o);
        if (c_views->parsed()) return run_views(views_o);
        if (c_render->parsed()) return run_render(render_o);
        if (c_train->parsed()) return run_train(train_o);
        if (c_eval->parsed()) return run_eval(eval_o);
        if (c_retrieve->parsed()) return run_retrieve(retrieve_o);
        if (c_report->parsed()) return run_report(report_o);
        if (c_plot->parsed()) return run_plot(plot_o);
    } catch (const UsageFailure& u) {
        std::cerr << "error: " << u.msg << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

}  // namespace fitrec
