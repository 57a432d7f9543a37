#include "fitrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace fitrec {

namespace {

void check_labels(const std::vector<PredictionRecord>& records, int classes) {
    for (const PredictionRecord& r : records) {
        if (r.true_label < 0 || r.true_label >= classes || r.predicted_label < 0 ||
            r.predicted_label >= classes)
            throw UnknownLabel("label index " + std::to_string(r.true_label) + "/" +
                               std::to_string(r.predicted_label) + " for record " + r.id);
    }
}

double distance2(const std::vector<float>& a, const std::vector<float>& b, Distance metric) {
    if (a.size() != b.size()) throw ShapeMismatch("embedding sizes differ");
    if (metric == Distance::Euclidean) {
        double d = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            d += t * t;
        }
        return d;
    }
    // cosine distance = 1 - cos similarity; zero vectors treated as maximally far
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0 || nb == 0) return 2.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// indices of `database` ranked by (distance to query, id), self skipped
std::vector<int> ranked_indices(const std::vector<float>& query,
                                const std::vector<PredictionRecord>& database,
                                const std::string& self_id, Distance metric) {
    std::vector<std::pair<double, int>> order;
    order.reserve(database.size());
    for (int i = 0; i < static_cast<int>(database.size()); ++i) {
        if (!self_id.empty() && database[i].id == self_id) continue;
        order.emplace_back(distance2(query, database[i].embedding, metric), i);
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return database[x.second].id < database[y.second].id;
    });
    std::vector<int> idx;
    idx.reserve(order.size());
    for (const auto& [d, i] : order) idx.push_back(i);
    return idx;
}

}  // namespace

ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records,
                                             int classes) {
    if (records.empty()) throw EmptyRecords("no prediction records");
    check_labels(records, classes);
    ClassificationMetrics m;
    m.confusion.assign(classes, std::vector<int>(classes, 0));
    for (const PredictionRecord& r : records) m.confusion[r.true_label][r.predicted_label]++;

    int correct = 0;
    double class_sum = 0;
    int class_n = 0;
    for (int c = 0; c < classes; ++c) {
        int row = 0;
        for (int j = 0; j < classes; ++j) row += m.confusion[c][j];
        correct += m.confusion[c][c];
        if (row > 0) {
            class_sum += static_cast<double>(m.confusion[c][c]) / row;
            ++class_n;
        } else {
            m.empty_classes.push_back(c);
        }
    }
    m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
    m.class_accuracy = class_n > 0 ? class_sum / class_n : 0.0;
    return m;
}

std::vector<std::string> retrieve_similar(const std::vector<float>& query,
                                          const std::vector<PredictionRecord>& database,
                                          int k, const std::string& self_id, Distance metric) {
    if (database.empty()) throw EmptyDatabase("retrieval database is empty");
    const std::vector<int> idx = ranked_indices(query, database, self_id, metric);
    std::vector<std::string> ids;
    const int n = std::min<int>(k, static_cast<int>(idx.size()));
    ids.reserve(n);
    for (int i = 0; i < n; ++i) ids.push_back(database[idx[i]].id);
    return ids;
}

double average_precision(const std::vector<int>& relevance) {
    int total_relevant = 0;
    for (int r : relevance) total_relevant += r != 0;
    if (total_relevant == 0) throw NoRelevantItems("ranking holds no relevant item");
    double sum = 0;
    int hits = 0;
    for (std::size_t i = 0; i < relevance.size(); ++i) {
        if (relevance[i] != 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / total_relevant;
}

double mean_average_precision(const std::vector<std::pair<int, double>>& class_ap) {
    if (class_ap.empty()) throw EmptyInput("no average-precision values");
    int max_class = 0;
    for (const auto& [c, ap] : class_ap) {
        if (c < 0) throw UnknownLabel("negative class index");
        max_class = std::max(max_class, c);
    }
    std::vector<double> sums(max_class + 1, 0.0);
    std::vector<int> counts(max_class + 1, 0);
    for (const auto& [c, ap] : class_ap) {
        sums[c] += ap;
        counts[c]++;
    }
    double total = 0;
    int classes = 0;
    for (int c = 0; c <= max_class; ++c)
        if (counts[c] > 0) {
            total += sums[c] / counts[c];
            ++classes;
        }
    return total / classes;
}

std::vector<PrPoint> precision_recall_curve(const std::vector<int>& relevance) {
    int total_relevant = 0;
    for (int r : relevance) total_relevant += r != 0;
    if (total_relevant == 0) throw NoRelevantItems("ranking holds no relevant item");
    std::vector<PrPoint> curve;
    curve.reserve(relevance.size());
    int hits = 0;
    for (std::size_t i = 0; i < relevance.size(); ++i) {
        hits += relevance[i] != 0;
        PrPoint p;
        p.rank = static_cast<int>(i + 1);
        p.recall = static_cast<double>(hits) / total_relevant;
        p.precision = static_cast<double>(hits) / static_cast<double>(i + 1);
        curve.push_back(p);
    }
    return curve;
}

EvalReport build_report(const std::vector<PredictionRecord>& records, const Taxonomy& taxonomy,
                        const std::vector<std::string>& excluded_classes, Distance metric) {
    const int C = taxonomy.size();
    check_labels(records, C);

    EvalReport rep;
    rep.classes = C;
    std::vector<bool> drop(C, false);
    for (const std::string& name : excluded_classes) {
        const int c = taxonomy.index_of(name);  // throws UnknownLabel
        if (!drop[c]) rep.excluded_classes.push_back(c);
        drop[c] = true;
    }
    std::sort(rep.excluded_classes.begin(), rep.excluded_classes.end());

    std::vector<PredictionRecord> kept;
    kept.reserve(records.size());
    for (const PredictionRecord& r : records)
        if (!drop[r.true_label]) kept.push_back(r);
    if (kept.empty()) throw EmptyRecords("every record was excluded");

    const ClassificationMetrics cm = classification_metrics(kept, C);
    rep.overall_accuracy = cm.overall_accuracy;
    rep.class_accuracy = cm.class_accuracy;
    rep.confusion = cm.confusion;
    rep.empty_classes = cm.empty_classes;
    // drop excluded classes from the "no samples" flag list: they are absent
    // by construction, not by accident
    rep.empty_classes.erase(
        std::remove_if(rep.empty_classes.begin(), rep.empty_classes.end(),
                       [&](int c) { return drop[c]; }),
        rep.empty_classes.end());
    rep.per_class_accuracy.assign(C, 0.0);
    for (int c = 0; c < C; ++c) {
        int row = 0;
        for (int j = 0; j < C; ++j) row += cm.confusion[c][j];
        if (row > 0)
            rep.per_class_accuracy[c] =
                static_cast<double>(cm.confusion[c][c]) / static_cast<double>(row);
    }

    // retrieval: every kept record queries all the others
    rep.class_ap.assign(C, 0.0);
    std::vector<double> ap_sums(C, 0.0);
    std::vector<int> ap_counts(C, 0);
    std::vector<std::pair<int, double>> query_aps;
    const std::size_t ranking_len = kept.size() - 1;
    std::vector<double> all_recall, all_precision;
    std::vector<std::vector<double>> cls_recall(C), cls_precision(C);
    std::vector<int> cls_queries(C, 0);
    int total_queries = 0;
    if (ranking_len > 0) {
        all_recall.assign(ranking_len, 0.0);
        all_precision.assign(ranking_len, 0.0);
        for (int c = 0; c < C; ++c) {
            cls_recall[c].assign(ranking_len, 0.0);
            cls_precision[c].assign(ranking_len, 0.0);
        }
        for (const PredictionRecord& q : kept) {
            const std::vector<int> idx = ranked_indices(q.embedding, kept, q.id, metric);
            std::vector<int> rel(idx.size());
            int relevant = 0;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                rel[i] = kept[idx[i]].true_label == q.true_label ? 1 : 0;
                relevant += rel[i];
            }
            if (relevant == 0) continue;  // lone member of its class
            const double ap = average_precision(rel);
            query_aps.emplace_back(q.true_label, ap);
            ap_sums[q.true_label] += ap;
            ap_counts[q.true_label]++;
            const std::vector<PrPoint> curve = precision_recall_curve(rel);
            for (std::size_t i = 0; i < curve.size(); ++i) {
                all_recall[i] += curve[i].recall;
                all_precision[i] += curve[i].precision;
                cls_recall[q.true_label][i] += curve[i].recall;
                cls_precision[q.true_label][i] += curve[i].precision;
            }
            cls_queries[q.true_label]++;
            ++total_queries;
        }
    }
    for (int c = 0; c < C; ++c) {
        if (ap_counts[c] > 0)
            rep.class_ap[c] = ap_sums[c] / ap_counts[c];
        else if (!drop[c])
            rep.classes_without_queries.push_back(c);
    }
    rep.map = query_aps.empty() ? 0.0 : mean_average_precision(query_aps);

    rep.class_pr.assign(C, {});
    if (total_queries > 0) {
        rep.pr_curve.resize(ranking_len);
        for (std::size_t i = 0; i < ranking_len; ++i) {
            rep.pr_curve[i].rank = static_cast<int>(i + 1);
            rep.pr_curve[i].recall = all_recall[i] / total_queries;
            rep.pr_curve[i].precision = all_precision[i] / total_queries;
        }
        for (int c = 0; c < C; ++c) {
            if (cls_queries[c] == 0) continue;
            rep.class_pr[c].resize(ranking_len);
            for (std::size_t i = 0; i < ranking_len; ++i) {
                rep.class_pr[c][i].rank = static_cast<int>(i + 1);
                rep.class_pr[c][i].recall = cls_recall[c][i] / cls_queries[c];
                rep.class_pr[c][i].precision = cls_precision[c][i] / cls_queries[c];
            }
        }
    }
    return rep;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string format_report_summary(const EvalReport& report) {
    std::string out = "metric,value\n";
    out += "overall_accuracy," + fmt_double(report.overall_accuracy) + "\n";
    out += "class_accuracy," + fmt_double(report.class_accuracy) + "\n";
    out += "map," + fmt_double(report.map) + "\n";
    return out;
}

std::string format_class_table(const EvalReport& report, const Taxonomy& taxonomy) {
    std::string out = "class,accuracy,ap\n";
    auto flagged = [](const std::vector<int>& v, int c) {
        return std::find(v.begin(), v.end(), c) != v.end();
    };
    for (int c = 0; c < report.classes; ++c) {
        if (flagged(report.excluded_classes, c)) continue;
        out += taxonomy.label(c) + ",";
        out += flagged(report.empty_classes, c) ? "" : fmt_double(report.per_class_accuracy[c]);
        out += ",";
        out += flagged(report.classes_without_queries, c) || flagged(report.empty_classes, c)
                   ? ""
                   : fmt_double(report.class_ap[c]);
        out += "\n";
    }
    return out;
}

std::string format_pr_curve(const std::vector<PrPoint>& curve) {
    std::string out = "rank,recall,precision\n";
    for (const PrPoint& p : curve) {
        out += std::to_string(p.rank) + "," + fmt_double(p.recall) + "," +
               fmt_double(p.precision) + "\n";
    }
    return out;
}

}  // namespace fitrec
