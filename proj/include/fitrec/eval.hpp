#pragma once

#include <string>
#include <vector>

#include "fitrec/dataset.hpp"
#include "fitrec/errors.hpp"

// Classification metrics, embedding-based retrieval, average precision and
// precision-recall curves, plus report assembly over a set of prediction
// records. Everything here is pure and deterministic.

namespace fitrec {

struct PredictionRecord {
    std::string id;
    int true_label = -1;
    int predicted_label = -1;
    std::vector<float> scores;     // one per class
    std::vector<float> embedding;  // retrieval feature
};

struct ClassificationMetrics {
    double overall_accuracy = 0;
    double class_accuracy = 0;
    std::vector<std::vector<int>> confusion;  // [true][predicted]
    std::vector<int> empty_classes;           // no samples; excluded from class accuracy
};

/// Overall accuracy, unweighted class accuracy and the confusion matrix.
ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records,
                                             int classes);

enum class Distance { Euclidean, Cosine };

/// Ranked ids of the k nearest database records. Ascending distance, ties
/// broken by id; a database record whose id equals `self_id` is skipped.
std::vector<std::string> retrieve_similar(const std::vector<float>& query,
                                          const std::vector<PredictionRecord>& database,
                                          int k, const std::string& self_id = "",
                                          Distance metric = Distance::Euclidean);

/// Uninterpolated average precision of a ranked 0/1 relevance list.
double average_precision(const std::vector<int>& relevance);

/// Class-then-global mean of per-query APs: queries are grouped by class,
/// averaged within each class, and the class means averaged.
double mean_average_precision(const std::vector<std::pair<int, double>>& class_ap);

struct PrPoint {
    int rank = 0;           // 1-based position in the ranking
    double recall = 0;
    double precision = 0;
};

/// One point per rank position; recall is non-decreasing and ends at 1.
std::vector<PrPoint> precision_recall_curve(const std::vector<int>& relevance);

struct EvalReport {
    int classes = 0;
    double overall_accuracy = 0;
    double class_accuracy = 0;
    std::vector<std::vector<int>> confusion;
    std::vector<double> per_class_accuracy;  // meaningful unless flagged empty
    std::vector<int> empty_classes;
    std::vector<double> class_ap;            // meaningful unless class has no usable query
    std::vector<int> classes_without_queries;
    double map = 0;
    std::vector<PrPoint> pr_curve;                // rank-wise mean over all queries
    std::vector<std::vector<PrPoint>> class_pr;   // rank-wise mean per class
    std::vector<int> excluded_classes;            // dropped before every metric
};

/// Full report. Retrieval treats every record as a query against all the
/// others (self excluded); relevance = same true label. When exclusions are
/// given, records of those classes are dropped before any metric is computed.
EvalReport build_report(const std::vector<PredictionRecord>& records, const Taxonomy& taxonomy,
                        const std::vector<std::string>& excluded_classes = {},
                        Distance metric = Distance::Euclidean);

/// "metric,value" lines: overall/class accuracy, mAP.
std::string format_report_summary(const EvalReport& report);
/// Per-class table: "class,accuracy,ap" (blank cells for flagged classes).
std::string format_class_table(const EvalReport& report, const Taxonomy& taxonomy);
/// "rank,recall,precision" lines for one curve.
std::string format_pr_curve(const std::vector<PrPoint>& curve);

}  // namespace fitrec
