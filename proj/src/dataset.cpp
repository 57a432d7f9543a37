#include "fitrec/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "fitrec/rng.hpp"

namespace fitrec {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + path);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// strtod is locale-dependent for '.' in theory; from_chars is not.
bool parse_double(const std::string& tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

std::string format_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

Taxonomy::Taxonomy(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw Error("taxonomy must be non-empty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
        if (l.empty()) throw Error("taxonomy labels must be non-empty");
        if (!seen.insert(l).second) throw Error("duplicate taxonomy label: " + l);
    }
}

Taxonomy Taxonomy::default_taxonomy() {
    return Taxonomy({
        "Blind Flange", "Cross", "Elbow 90", "Elbow non 90", "Flange", "Flange WN",
        "Olet", "Orifice Flange", "Pipe", "Reducer CONC", "Reducer ECC",
        "Reducer Insert", "Safety Valve", "Strainer", "Tee", "Tee RED", "Valve", "Wye",
    });
}

int Taxonomy::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) return static_cast<int>(i);
    throw UnknownLabel(label);
}

bool Taxonomy::contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::vector<int> Manifest::class_counts() const {
    std::vector<int> counts(taxonomy.size(), 0);
    for (const Sample& s : samples) counts.at(s.label)++;
    return counts;
}

// --- point cloud files -------------------------------------------------------

std::string format_point_cloud(const PointCloud& cloud, const std::string& comment) {
    std::string out;
    out.reserve(cloud.points.size() * 32 + comment.size() + 3);
    if (!comment.empty()) {
        out += "# ";
        out += comment;
        out += '\n';
    }
    for (const Vec3& p : cloud.points) {
        out += format_coord(p.x);
        out += ' ';
        out += format_coord(p.y);
        out += ' ';
        out += format_coord(p.z);
        out += '\n';
    }
    return out;
}

PointCloud parse_point_cloud(const std::string& text, const std::string& origin) {
    PointCloud cloud;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ls(t);
        std::string a, b, c, extra;
        ls >> a >> b >> c;
        Vec3 p;
        if (!ls || !parse_double(a, p.x) || !parse_double(b, p.y) || !parse_double(c, p.z))
            throw ParseError("malformed point in " + origin, line_no);
        if (ls >> extra) throw ParseError("trailing tokens in " + origin, line_no);
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) throw EmptyCloud("no points in " + origin);
    return cloud;
}

PointCloud read_point_cloud(const std::string& path) {
    PointCloud cloud = parse_point_cloud(read_file(path), path);
    return cloud;
}

void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       const std::string& comment) {
    write_file(path, format_point_cloud(cloud, comment));
}

// --- taxonomy / manifest files ----------------------------------------------

Taxonomy load_taxonomy(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t[0] != '#') labels.push_back(t);
    }
    return Taxonomy(std::move(labels));
}

void save_taxonomy(const Taxonomy& taxonomy, const std::string& path,
                   const std::string& comment) {
    std::string out;
    if (!comment.empty()) {
        out += "# ";
        out += comment;
        out += '\n';
    }
    for (const auto& l : taxonomy.labels()) {
        out += l;
        out += '\n';
    }
    write_file(path, out);
}

Manifest load_manifest(const std::string& csv_path, const std::string& taxonomy_path) {
    Manifest m;
    m.taxonomy = load_taxonomy(taxonomy_path);

    std::istringstream in(read_file(csv_path));
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!saw_header) {
            if (t != "id,label,path")
                throw ParseError("expected header 'id,label,path' in " + csv_path, line_no);
            saw_header = true;
            continue;
        }
        const std::size_t c1 = t.find(',');
        const std::size_t c2 = (c1 == std::string::npos) ? std::string::npos : t.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw ParseError("expected 3 comma-separated fields in " + csv_path, line_no);
        Sample s;
        s.id = t.substr(0, c1);
        const std::string label = t.substr(c1 + 1, c2 - c1 - 1);
        s.path = t.substr(c2 + 1);
        s.label = m.taxonomy.index_of(label);  // throws UnknownLabel
        m.samples.push_back(std::move(s));
    }
    if (!saw_header) throw ParseError("missing header in " + csv_path, line_no);
    m.class_counts();  // validates label indices
    return m;
}

void save_manifest(const Manifest& manifest, const std::string& csv_path,
                   const std::string& taxonomy_path, const std::string& comment) {
    save_taxonomy(manifest.taxonomy, taxonomy_path, comment);
    std::string out;
    if (!comment.empty()) {
        out += "# ";
        out += comment;
        out += '\n';
    }
    out += "id,label,path\n";
    for (const Sample& s : manifest.samples) {
        const std::string& label = manifest.taxonomy.label(s.label);
        if (s.id.find(',') != std::string::npos || label.find(',') != std::string::npos ||
            s.path.find(',') != std::string::npos)
            throw Error("manifest fields must not contain commas: " + s.id);
        out += s.id;
        out += ',';
        out += label;
        out += ',';
        out += s.path;
        out += '\n';
    }
    write_file(csv_path, out);
}

// --- split -------------------------------------------------------------------

SplitResult stratified_split(const Manifest& manifest, const SplitConfig& cfg) {
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw Error("train_fraction must be in (0,1)");

    const int nclasses = manifest.taxonomy.size();
    std::vector<std::vector<std::size_t>> per_class(nclasses);
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
        per_class[manifest.samples[i].label].push_back(i);

    for (int c = 0; c < nclasses; ++c)
        if (per_class[c].empty()) throw EmptyClass(manifest.taxonomy.label(c));

    std::vector<char> in_train(manifest.samples.size(), 0);
    SplitResult result;
    for (int c = 0; c < nclasses; ++c) {
        auto& idx = per_class[c];
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);

        const std::size_t n = idx.size();
        std::size_t ntrain = static_cast<std::size_t>(
            std::llround(cfg.train_fraction * static_cast<double>(n)));
        if (n >= 2) ntrain = std::clamp<std::size_t>(ntrain, 1, n - 1);
        else ntrain = 1;  // lone sample goes to train

        for (std::size_t i = 0; i < ntrain; ++i) in_train[idx[i]] = 1;
        if (ntrain == n) result.classes_without_val.push_back(c);
    }

    result.train.taxonomy = manifest.taxonomy;
    result.val.taxonomy = manifest.taxonomy;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        (in_train[i] ? result.train : result.val).samples.push_back(manifest.samples[i]);
    }
    return result;
}

}  // namespace fitrec
