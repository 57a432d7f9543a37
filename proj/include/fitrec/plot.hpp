#pragma once

#include <string>
#include <vector>

#include "fitrec/eval.hpp"

namespace fitrec {

struct PlotSeries {
    std::string label;
    std::vector<PrPoint> points;
};

/// Standalone SVG document with one precision/recall curve per series.
/// Both axes span [0,1]; output is deterministic (same input, same bytes).
/// A non-empty comment is embedded as an XML comment near the top.
std::string render_pr_svg(const std::vector<PlotSeries>& series,
                          const std::string& title,
                          const std::string& comment = "");

/// Reads curves written by format_pr_curve ("rank,recall,precision", one
/// series) or the per-class variant ("class,rank,recall,precision", one
/// series per class). '#' lines are skipped. Throws ParseError on anything
/// else.
std::vector<PlotSeries> load_pr_csv(const std::string& path);

}  // namespace fitrec
