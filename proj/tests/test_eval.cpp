#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "fitrec/eval.hpp"
#include "fitrec/rng.hpp"

using namespace fitrec;

namespace {

// brute-force oracle: recompute the precision at every relevant rank from
// scratch by counting, no running state
double oracle_ap(const std::vector<int>& rel) {
    int total = 0;
    for (int r : rel) total += r != 0;
    double sum = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (rel[i] == 0) continue;
        int in_top = 0;
        for (std::size_t j = 0; j <= i; ++j) in_top += rel[j] != 0;
        sum += static_cast<double>(in_top) / static_cast<double>(i + 1);
    }
    return sum / total;
}

std::vector<int> random_relevance(Rng& rng, int len) {
    std::vector<int> rel(len);
    bool any = false;
    for (int& r : rel) {
        r = rng.uniform01() < 0.3 ? 1 : 0;
        any = any || r;
    }
    if (!any) rel[static_cast<std::size_t>(rng.uniform_index(len))] = 1;
    return rel;
}

PredictionRecord rec(const std::string& id, int truth, int pred,
                     std::vector<float> emb = {}) {
    PredictionRecord r;
    r.id = id;
    r.true_label = truth;
    r.predicted_label = pred;
    r.embedding = std::move(emb);
    return r;
}

}  // namespace

// ---- classification ---------------------------------------------------------

TEST_CASE("classification metrics: hand examples") {
    // all correct
    std::vector<PredictionRecord> all = {rec("a", 0, 0), rec("b", 1, 1), rec("c", 2, 2)};
    auto m = classification_metrics(all, 3);
    CHECK(m.overall_accuracy == 1.0);
    CHECK(m.class_accuracy == 1.0);

    // class 0: 1/2 correct, class 1: 1/1 -> overall 2/3, class mean 0.75
    std::vector<PredictionRecord> mixed = {rec("a", 0, 0), rec("b", 0, 1), rec("c", 1, 1)};
    m = classification_metrics(mixed, 3);
    CHECK(std::abs(m.overall_accuracy - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(m.class_accuracy - 0.75) < 1e-15);
    // class 2 has no samples: flagged, not averaged
    REQUIRE(m.empty_classes.size() == 1);
    CHECK(m.empty_classes[0] == 2);

    CHECK_THROWS_AS(classification_metrics({}, 3), EmptyRecords);
    CHECK_THROWS_AS(classification_metrics({rec("x", 5, 0)}, 3), UnknownLabel);
}

TEST_CASE("confusion matrix: trace/total equals overall accuracy, rows count samples") {
    Rng rng(900);
    for (int trial = 0; trial < 50; ++trial) {
        const int C = 2 + static_cast<int>(rng.uniform_index(6));
        const int n = 1 + static_cast<int>(rng.uniform_index(60));
        std::vector<PredictionRecord> rs;
        std::vector<int> per_class(C, 0);
        for (int i = 0; i < n; ++i) {
            const int t = static_cast<int>(rng.uniform_index(C));
            const int p = static_cast<int>(rng.uniform_index(C));
            rs.push_back(rec("s" + std::to_string(i), t, p));
            per_class[t]++;
        }
        auto m = classification_metrics(rs, C);
        int trace = 0;
        for (int c = 0; c < C; ++c) {
            trace += m.confusion[c][c];
            int row = 0;
            for (int j = 0; j < C; ++j) row += m.confusion[c][j];
            CHECK(row == per_class[c]);
        }
        CHECK(m.overall_accuracy == static_cast<double>(trace) / n);
    }
}

// ---- average precision ------------------------------------------------------

TEST_CASE("average precision: hand examples") {
    CHECK(std::abs(average_precision({1, 0, 1, 1}) - (1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0) <
          1e-15);
    CHECK(average_precision({1, 1, 1}) == 1.0);
    CHECK(average_precision({1}) == 1.0);
    CHECK(std::abs(average_precision({0, 1}) - 0.5) < 1e-15);
    CHECK_THROWS_AS(average_precision({0, 0, 0}), NoRelevantItems);
    CHECK_THROWS_AS(average_precision({}), NoRelevantItems);
}

TEST_CASE("average precision matches the brute-force oracle on 1000 rankings") {
    Rng rng(901);
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = 1 + static_cast<int>(rng.uniform_index(50));
        const auto rel = random_relevance(rng, len);
        const double got = average_precision(rel);
        const double want = oracle_ap(rel);
        CHECK(std::abs(got - want) < 1e-12);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

// ---- mean average precision -------------------------------------------------

TEST_CASE("mAP: class-then-global averaging") {
    // class 0 APs {1.0, 0.5} -> 0.75; class 1 {0.5} -> (0.75+0.5)/2
    CHECK(std::abs(mean_average_precision({{0, 1.0}, {0, 0.5}, {1, 0.5}}) - 0.625) < 1e-15);
    // one class only
    CHECK(std::abs(mean_average_precision({{3, 0.25}, {3, 0.75}}) - 0.5) < 1e-15);
    CHECK_THROWS_AS(mean_average_precision({}), EmptyInput);

    // balanced classes: class-averaged equals query-averaged
    Rng rng(902);
    for (int trial = 0; trial < 20; ++trial) {
        const int C = 2 + static_cast<int>(rng.uniform_index(5));
        const int per = 1 + static_cast<int>(rng.uniform_index(8));
        std::vector<std::pair<int, double>> aps;
        double plain_sum = 0;
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < per; ++i) {
                const double ap = rng.uniform01();
                aps.emplace_back(c, ap);
                plain_sum += ap;
            }
        const double got = mean_average_precision(aps);
        CHECK(std::abs(got - plain_sum / (C * per)) < 1e-12);
    }
}

// ---- precision-recall curve -------------------------------------------------

TEST_CASE("precision-recall curve: hand examples and properties") {
    auto curve = precision_recall_curve({1, 1, 0});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].rank == 1);
    CHECK(curve[0].recall == 0.5);
    CHECK(curve[0].precision == 1.0);
    CHECK(curve[1].recall == 1.0);
    CHECK(curve[1].precision == 1.0);
    CHECK(curve[2].recall == 1.0);
    CHECK(std::abs(curve[2].precision - 2.0 / 3.0) < 1e-15);

    curve = precision_recall_curve({0, 1});
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].recall == 0.0);
    CHECK(curve[0].precision == 0.0);
    CHECK(curve[1].recall == 1.0);
    CHECK(curve[1].precision == 0.5);

    CHECK_THROWS_AS(precision_recall_curve({0, 0}), NoRelevantItems);

    Rng rng(903);
    for (int trial = 0; trial < 200; ++trial) {
        const int len = 1 + static_cast<int>(rng.uniform_index(40));
        const auto rel = random_relevance(rng, len);
        const auto c = precision_recall_curve(rel);
        REQUIRE(c.size() == rel.size());
        CHECK(c.back().recall == 1.0);
        for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i].recall >= c[i - 1].recall);
    }
}

// ---- retrieval --------------------------------------------------------------

TEST_CASE("retrieval: self-exclusion, ties by id, k clamp") {
    std::vector<PredictionRecord> db = {
        rec("q", 0, 0, {0.0f, 0.0f}),
        rec("b", 0, 0, {1.0f, 0.0f}),
        rec("a", 1, 1, {0.0f, 1.0f}),  // same distance as "b", lower id
        rec("far", 1, 1, {5.0f, 5.0f}),
    };
    auto top = retrieve_similar({0.0f, 0.0f}, db, 1, "q");
    REQUIRE(top.size() == 1);
    CHECK(top[0] == "a");  // tie at distance 1 broken toward the lower id

    auto all = retrieve_similar({0.0f, 0.0f}, db, 99, "q");
    REQUIRE(all.size() == 3);
    CHECK(all[0] == "a");
    CHECK(all[1] == "b");
    CHECK(all[2] == "far");

    CHECK_THROWS_AS(retrieve_similar({0.0f}, {}, 1), EmptyDatabase);
}

TEST_CASE("retrieval matches an exhaustive-sort oracle") {
    Rng rng(904);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 20;
        const int dim = 4;
        std::vector<PredictionRecord> db;
        for (int i = 0; i < n; ++i) {
            std::vector<float> e(dim);
            for (float& x : e) x = static_cast<float>(rng.uniform(-1, 1));
            db.push_back(rec("item" + std::to_string(i), 0, 0, e));
        }
        std::vector<float> q(dim);
        for (float& x : q) x = static_cast<float>(rng.uniform(-1, 1));

        auto got = retrieve_similar(q, db, n, "");

        // oracle: compute all distances, sort pairs independently
        std::vector<std::pair<double, std::string>> pairs;
        for (const auto& r : db) {
            double d = 0;
            for (int k = 0; k < dim; ++k) {
                const double t = static_cast<double>(q[k]) - static_cast<double>(r.embedding[k]);
                d += t * t;
            }
            pairs.emplace_back(std::sqrt(d), r.id);
        }
        std::sort(pairs.begin(), pairs.end());
        for (int i = 0; i < n; ++i) CHECK(got[i] == pairs[i].second);
    }
}

// ---- report -----------------------------------------------------------------

namespace {

/// Clustered embeddings so same-class records retrieve each other first.
std::vector<PredictionRecord> clustered_records(int classes, int per_class, double acc,
                                                std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PredictionRecord> rs;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            std::vector<float> e = {static_cast<float>(3.0 * c + 0.3 * rng.uniform01()),
                                    static_cast<float>(0.3 * rng.uniform01())};
            const int pred = rng.uniform01() < acc ? c : (c + 1) % classes;
            rs.push_back(rec("r" + std::to_string(c) + "_" + std::to_string(i), c, pred, e));
        }
    return rs;
}

}  // namespace

TEST_CASE("report: tallies match hand counts, exclusions drop queries everywhere") {
    Taxonomy tax({"A", "B", "C"});
    // A: 2/3 correct; B: 1/2; C: 2/2 -> overall 5/7
    std::vector<PredictionRecord> rs = {
        rec("a0", 0, 0, {0.0f, 0.1f}), rec("a1", 0, 0, {0.1f, 0.0f}),
        rec("a2", 0, 1, {0.2f, 0.1f}), rec("b0", 1, 1, {5.0f, 0.0f}),
        rec("b1", 1, 2, {5.1f, 0.1f}), rec("c0", 2, 2, {0.0f, 7.0f}),
        rec("c1", 2, 2, {0.1f, 7.1f}),
    };
    auto rep = build_report(rs, tax);
    CHECK(std::abs(rep.overall_accuracy - 5.0 / 7.0) < 1e-15);
    CHECK(std::abs(rep.class_accuracy - (2.0 / 3 + 0.5 + 1.0) / 3.0) < 1e-15);
    CHECK(std::abs(rep.per_class_accuracy[0] - 2.0 / 3.0) < 1e-15);
    CHECK(rep.per_class_accuracy[1] == 0.5);
    CHECK(rep.per_class_accuracy[2] == 1.0);
    CHECK(rep.confusion[0][0] == 2);
    CHECK(rep.confusion[0][1] == 1);
    CHECK(rep.confusion[1][2] == 1);
    CHECK(rep.empty_classes.empty());
    // clusters are tight: retrieval is perfect, all APs 1
    for (int c = 0; c < 3; ++c) CHECK(rep.class_ap[c] == 1.0);
    CHECK(rep.map == 1.0);
    REQUIRE(!rep.pr_curve.empty());
    CHECK(rep.pr_curve.back().recall == 1.0);
    CHECK(rep.pr_curve.size() == rs.size() - 1);

    // dropping class B removes its records from every metric
    auto excl = build_report(rs, tax, {"B"});
    CHECK(std::abs(excl.overall_accuracy - 4.0 / 5.0) < 1e-15);
    CHECK(std::abs(excl.class_accuracy - (2.0 / 3 + 1.0) / 2.0) < 1e-15);
    REQUIRE(excl.excluded_classes.size() == 1);
    CHECK(excl.excluded_classes[0] == 1);
    int b_row = 0;
    for (int j = 0; j < 3; ++j) b_row += excl.confusion[1][j];
    CHECK(b_row == 0);
    CHECK(excl.pr_curve.size() == 4);  // 5 kept records, ranking length 4

    // empty exclusion list changes nothing
    auto plain = build_report(rs, tax, {});
    CHECK(plain.overall_accuracy == rep.overall_accuracy);
    CHECK(plain.map == rep.map);

    CHECK_THROWS_AS(build_report(rs, tax, {"NoSuchClass"}), UnknownLabel);
}

TEST_CASE("report: class-then-global mAP agrees with direct recomputation") {
    Taxonomy tax({"A", "B", "C", "D"});
    auto rs = clustered_records(4, 6, 0.8, 905);
    auto rep = build_report(rs, tax);

    // independent recomputation straight from definitions
    std::map<int, std::vector<double>> by_class;
    for (const auto& q : rs) {
        std::vector<std::pair<double, std::string>> pairs;
        for (const auto& r : rs) {
            if (r.id == q.id) continue;
            double d = 0;
            for (std::size_t k = 0; k < q.embedding.size(); ++k) {
                const double t = static_cast<double>(q.embedding[k]) -
                                 static_cast<double>(r.embedding[k]);
                d += t * t;
            }
            pairs.emplace_back(d, r.id);
        }
        std::sort(pairs.begin(), pairs.end());
        std::vector<int> rel;
        for (const auto& [d, id] : pairs) {
            for (const auto& r : rs)
                if (r.id == id) rel.push_back(r.true_label == q.true_label ? 1 : 0);
        }
        by_class[q.true_label].push_back(oracle_ap(rel));
    }
    double map = 0;
    for (const auto& [c, aps] : by_class) {
        double s = 0;
        for (double ap : aps) s += ap;
        map += s / aps.size();
    }
    map /= by_class.size();
    CHECK(std::abs(rep.map - map) < 1e-12);
    for (const auto& [c, aps] : by_class) {
        double s = 0;
        for (double ap : aps) s += ap;
        CHECK(std::abs(rep.class_ap[c] - s / aps.size()) < 1e-12);
    }
}

TEST_CASE("report formatting: summary, class table, pr curve") {
    Taxonomy tax({"A", "B"});
    std::vector<PredictionRecord> rs = {
        rec("a0", 0, 0, {0.0f}), rec("a1", 0, 0, {0.1f}),
        rec("b0", 1, 1, {9.0f}), rec("b1", 1, 1, {9.1f}),
    };
    auto rep = build_report(rs, tax);
    const std::string summary = format_report_summary(rep);
    CHECK(summary.find("metric,value\n") == 0);
    CHECK(summary.find("overall_accuracy,1.000000") != std::string::npos);
    CHECK(summary.find("map,1.000000") != std::string::npos);

    const std::string table = format_class_table(rep, tax);
    CHECK(table.find("class,accuracy,ap\n") == 0);
    CHECK(table.find("A,1.000000,1.000000") != std::string::npos);

    const std::string pr = format_pr_curve(rep.pr_curve);
    CHECK(pr.find("rank,recall,precision\n") == 0);
    CHECK(pr.find("1,1.000000,1.000000") != std::string::npos);
}
