#include "fitrec/plot.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fitrec/errors.hpp"

namespace fitrec {

namespace {

// Area the curves are drawn into; the rest is margins, labels, legend.
constexpr double kLeft = 70.0, kTop = 50.0, kPlotW = 460.0, kPlotH = 420.0;
constexpr int kWidth = 740, kHeight = 540;

const char* const kPalette[] = {
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double sx(double recall) { return kLeft + recall * kPlotW; }
double sy(double precision) { return kTop + (1.0 - precision) * kPlotH; }

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_pr_svg(const std::vector<PlotSeries>& series,
                          const std::string& title, const std::string& comment) {
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    if (!comment.empty()) s += "<!-- " + escape_xml(comment) + " -->\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
         "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
         std::to_string(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(kLeft + kPlotW / 2) +
         "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" "
         "text-anchor=\"middle\">" +
         escape_xml(title) + "</text>\n";

    // grid and tick labels every 0.25 on both axes
    for (int i = 0; i <= 4; ++i) {
        const double v = 0.25 * i;
        s += "<line x1=\"" + fmt(sx(v)) + "\" y1=\"" + fmt(sy(0)) + "\" x2=\"" +
             fmt(sx(v)) + "\" y2=\"" + fmt(sy(1)) +
             "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        s += "<line x1=\"" + fmt(sx(0)) + "\" y1=\"" + fmt(sy(v)) + "\" x2=\"" +
             fmt(sx(1)) + "\" y2=\"" + fmt(sy(v)) +
             "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        s += "<text x=\"" + fmt(sx(v)) + "\" y=\"" + fmt(sy(0) + 18) +
             "\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"middle\">" +
             fmt(v) + "</text>\n";
        s += "<text x=\"" + fmt(sx(0) - 8) + "\" y=\"" + fmt(sy(v) + 4) +
             "\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"end\">" +
             fmt(v) + "</text>\n";
    }
    // axis frame
    s += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" +
         fmt(kPlotW) + "\" height=\"" + fmt(kPlotH) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    s += "<text x=\"" + fmt(kLeft + kPlotW / 2) + "\" y=\"" + fmt(sy(0) + 40) +
         "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\">recall</text>\n";
    s += "<text x=\"20\" y=\"" + fmt(kTop + kPlotH / 2) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 20 " +
         fmt(kTop + kPlotH / 2) + ")\">precision</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPaletteSize];
        std::string pts;
        for (const PrPoint& p : series[i].points) {
            if (!pts.empty()) pts += ' ';
            pts += fmt(sx(p.recall)) + "," + fmt(sy(p.precision));
        }
        if (series[i].points.size() == 1) {
            const PrPoint& p = series[i].points[0];
            s += "<circle cx=\"" + fmt(sx(p.recall)) + "\" cy=\"" +
                 fmt(sy(p.precision)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
        } else if (!pts.empty()) {
            s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
                 color + "\" stroke-width=\"1.5\"/>\n";
        }
        // legend row
        const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
        const double lx = kLeft + kPlotW + 16.0;
        s += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
             fmt(lx + 22) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fmt(lx + 28) + "\" y=\"" + fmt(ly) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" +
             escape_xml(series[i].label) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::vector<PlotSeries> load_pr_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<PlotSeries> series;
    bool per_class = false;
    bool saw_header = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line == "rank,recall,precision") {
                per_class = false;
            } else if (line == "class,rank,recall,precision") {
                per_class = true;
            } else {
                throw ParseError("unrecognized curve header in " + path, line_no);
            }
            saw_header = true;
            continue;
        }
        std::string label;
        std::string rest = line;
        if (per_class) {
            const std::size_t c = rest.find(',');
            if (c == std::string::npos)
                throw ParseError("missing class column in " + path, line_no);
            label = rest.substr(0, c);
            rest = rest.substr(c + 1);
        }
        PrPoint p;
        char trailing;
        std::istringstream ls(rest);
        int fields = 0;
        for (std::string tok; std::getline(ls, tok, ','); ++fields) {
            std::istringstream ts(tok);
            bool ok = false;
            if (fields == 0)
                ok = static_cast<bool>(ts >> p.rank);
            else if (fields == 1)
                ok = static_cast<bool>(ts >> p.recall);
            else if (fields == 2)
                ok = static_cast<bool>(ts >> p.precision);
            if (!ok || (ts >> trailing))
                throw ParseError("malformed curve row in " + path, line_no);
        }
        if (fields != 3)
            throw ParseError("expected rank,recall,precision in " + path, line_no);
        if (series.empty() || series.back().label != label)
            series.push_back({label, {}});
        series.back().points.push_back(p);
    }
    if (!saw_header) throw ParseError("no curve header in " + path, 0);
    return series;
}

}  // namespace fitrec
