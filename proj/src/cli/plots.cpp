#include "shdbench/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "shdbench/error.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::cli {
namespace {

std::string px(double v) {
    char b[48];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string tick_label(double v) {
    char b[48];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Svg {
    std::string body;

    Svg(double w, double h) {
        body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(w) + "\" height=\"" +
                px(h) + "\" viewBox=\"0 0 " + px(w) + " " + px(h) + "\">\n";
        body += "<rect width=\"" + px(w) + "\" height=\"" + px(h) + "\" fill=\"#ffffff\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke, double w) {
        body += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" +
                px(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(w) + "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const char* stroke, const char* fill) {
        body += "<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(w) + "\" height=\"" +
                px(h) + "\" stroke=\"" + stroke + "\" fill=\"" + fill + "\"/>\n";
    }
    void circle(double cx, double cy, double r, const std::string& fill) {
        body += "<circle cx=\"" + px(cx) + "\" cy=\"" + px(cy) + "\" r=\"" + px(r) + "\" fill=\"" +
                fill + "\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size, const char* anchor,
              const std::string& extra = "") {
        body += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"sans-serif\" " +
                "font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor + "\"" +
                (extra.empty() ? "" : " " + extra) + ">" + xml_escape(s) + "</text>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke) {
        body += "<polyline fill=\"none\" stroke=\"";
        body += stroke;
        body += "\" stroke-width=\"1.50\" points=\"";
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i) body += " ";
            body += px(pts[i].first) + "," + px(pts[i].second);
        }
        body += "\"/>\n";
    }
    std::string finish() { return body + "</svg>\n"; }
};

struct Scale {
    double lo = 0.0, hi = 1.0;  // data range
    double p0 = 0.0, p1 = 1.0;  // pixel range (y axes pass p0 > p1)

    double operator()(double v) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

/// Pads [lo,hi] by the fraction on both sides; degenerate ranges get a unit.
void pad_range(double& lo, double& hi, double frac) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
        return;
    }
    const double m = (hi - lo) * frac;
    lo -= m;
    hi += m;
}

struct Panel {
    double x = 0, y = 0, w = 0, h = 0;  // plot area in pixels
};

void draw_frame(Svg& svg, const Panel& p, const Scale& sx, const Scale& sy,
                const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    for (int i = 0; i <= 4; ++i) {
        const double xv = sx.lo + (sx.hi - sx.lo) * i / 4.0;
        const double yv = sy.lo + (sy.hi - sy.lo) * i / 4.0;
        const double xp = sx(xv);
        const double yp = sy(yv);
        svg.line(xp, p.y, xp, p.y + p.h, "#e6e6e6", 0.8);
        svg.line(p.x, yp, p.x + p.w, yp, "#e6e6e6", 0.8);
        svg.line(xp, p.y + p.h, xp, p.y + p.h + 4, "#333333", 1.0);
        svg.line(p.x - 4, yp, p.x, yp, "#333333", 1.0);
        svg.text(xp, p.y + p.h + 16, tick_label(xv), 10, "middle");
        svg.text(p.x - 7, yp + 3.5, tick_label(yv), 10, "end");
    }
    svg.rect(p.x, p.y, p.w, p.h, "#333333", "none");
    if (!title.empty()) svg.text(p.x + p.w / 2, p.y - 10, title, 13, "middle");
    if (!xlabel.empty()) svg.text(p.x + p.w / 2, p.y + p.h + 32, xlabel, 11, "middle");
    if (!ylabel.empty())
        svg.text(p.x - 40, p.y + p.h / 2, ylabel, 11, "middle",
                 "transform=\"rotate(-90 " + px(p.x - 40) + " " + px(p.y + p.h / 2) + ")\"");
}

constexpr std::array<const char*, 11> kPalette = {
    "#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4", "#8c613c",
    "#dc7ec0", "#797979", "#d5bb67", "#82c6e2", "#2f4b7c"};

const char* split_color(const std::string& split) {
    if (split == "train") return "#4878cf";
    if (split == "val") return "#ee854a";
    if (split == "test") return "#6acc65";
    return "#797979";
}

constexpr std::array<const char*, 4> kClassColor = {"#d0d0d0", "#4878cf", "#d4a017", "#c0392b"};
constexpr std::array<const char*, 4> kClassName = {"true negative", "true positive",
                                                   "false positive", "false negative"};

}  // namespace

void write_perf_efficiency(const std::vector<PerfPoint>& points, const std::string& svg_path,
                           const std::string& csv_path) {
    require(!points.empty(), ErrCat::data, "nothing to plot: no result rows");

    std::vector<std::string> variants;  // legend order = first appearance
    for (const auto& pt : points)
        if (std::find(variants.begin(), variants.end(), pt.variant) == variants.end())
            variants.push_back(pt.variant);
    auto color_of = [&](const std::string& v) {
        const auto i = static_cast<size_t>(
            std::find(variants.begin(), variants.end(), v) - variants.begin());
        return kPalette[i % kPalette.size()];
    };

    double xlo = 1e300, xhi = -1e300;
    double alo = 1e300, ahi = -1e300, plo = 1e300, phi = -1e300;
    std::vector<double> logp(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        logp[i] = std::log10(std::max(1.0, points[i].trainable_params));
        xlo = std::min(xlo, logp[i]);
        xhi = std::max(xhi, logp[i]);
        alo = std::min(alo, points[i].auroc);
        ahi = std::max(ahi, points[i].auroc);
        plo = std::min(plo, points[i].auprc);
        phi = std::max(phi, points[i].auprc);
    }
    pad_range(xlo, xhi, 0.08);
    pad_range(alo, ahi, 0.10);
    pad_range(plo, phi, 0.10);

    Svg svg(1140, 470);
    const Panel left{70, 60, 380, 330};
    const Panel right{560, 60, 380, 330};
    const Scale sx_l{xlo, xhi, left.x, left.x + left.w};
    const Scale sx_r{xlo, xhi, right.x, right.x + right.w};
    const Scale sy_a{alo, ahi, left.y + left.h, left.y};
    const Scale sy_p{plo, phi, right.y + right.h, right.y};
    svg.text(70, 28, "performance against adaptation budget", 15, "start");
    draw_frame(svg, left, sx_l, sy_a, "AUROC", "trainable parameters (log10)", "test macro AUROC");
    draw_frame(svg, right, sx_r, sy_p, "AUPRC", "trainable parameters (log10)", "test macro AUPRC");
    for (size_t i = 0; i < points.size(); ++i) {
        svg.circle(sx_l(logp[i]), sy_a(points[i].auroc), 4.0, color_of(points[i].variant));
        svg.circle(sx_r(logp[i]), sy_p(points[i].auprc), 4.0, color_of(points[i].variant));
    }
    for (size_t i = 0; i < variants.size(); ++i) {
        const double y = 70 + 18 * static_cast<double>(i);
        svg.circle(962, y - 3.5, 4.0, color_of(variants[i]));
        svg.text(972, y, variants[i], 11, "start");
    }
    spit_file(svg_path, svg.finish());

    CsvTable t;
    t.header = {"variant", "seed", "trainable_params", "auroc", "auprc"};
    for (const auto& pt : points)
        t.rows.push_back({pt.variant, pt.seed, format_double(pt.trainable_params),
                          format_double(pt.auroc), format_double(pt.auprc)});
    write_csv(csv_path, t);
}

void write_topk_curve(std::vector<CurvePoint> points, const std::string& svg_path,
                      const std::string& csv_path) {
    require(!points.empty(), ErrCat::data, "nothing to plot: empty sensitivity curve");
    std::sort(points.begin(), points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.k < b.k; });

    double xlo = points.front().k, xhi = points.back().k;
    double ylo = 1e300, yhi = -1e300;
    for (const auto& pt : points) {
        ylo = std::min(ylo, pt.auroc);
        yhi = std::max(yhi, pt.auroc);
    }
    pad_range(xlo, xhi, 0.06);
    pad_range(ylo, yhi, 0.12);

    Svg svg(560, 430);
    const Panel p{70, 50, 420, 320};
    const Scale sx{xlo, xhi, p.x, p.x + p.w};
    const Scale sy{ylo, yhi, p.y + p.h, p.y};
    draw_frame(svg, p, sx, sy, "feature count sensitivity", "top-k features kept",
               "mean validation AUROC");
    std::vector<std::pair<double, double>> line;
    line.reserve(points.size());
    for (const auto& pt : points) line.emplace_back(sx(pt.k), sy(pt.auroc));
    svg.polyline(line, "#4878cf");
    for (const auto& pt : points) svg.circle(sx(pt.k), sy(pt.auroc), 3.5, "#4878cf");
    spit_file(svg_path, svg.finish());

    CsvTable t;
    t.header = {"k", "auroc"};
    for (const auto& pt : points) t.rows.push_back({std::to_string(pt.k), format_double(pt.auroc)});
    write_csv(csv_path, t);
}

void write_embedding_plot(const std::vector<EmbeddingPoint>& points, bool color_errors,
                          const data::TargetSpec& spec, double tau, const std::string& svg_path,
                          const std::string& csv_path) {
    require(!points.empty(), ErrCat::data, "nothing to plot: no embedded records");

    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& pt : points) {
        xlo = std::min(xlo, pt.x);
        xhi = std::max(xhi, pt.x);
        ylo = std::min(ylo, pt.y);
        yhi = std::max(yhi, pt.y);
    }
    pad_range(xlo, xhi, 0.06);
    pad_range(ylo, yhi, 0.06);

    if (!color_errors) {
        Svg svg(620, 470);
        const Panel p{60, 50, 400, 360};
        const Scale sx{xlo, xhi, p.x, p.x + p.w};
        const Scale sy{ylo, yhi, p.y + p.h, p.y};
        draw_frame(svg, p, sx, sy, "pooled embeddings by split", "component 1", "component 2");
        for (const auto& pt : points) svg.circle(sx(pt.x), sy(pt.y), 2.5, split_color(pt.split));
        const std::array<const char*, 3> splits = {"train", "val", "test"};
        for (size_t i = 0; i < splits.size(); ++i) {
            const double y = 60 + 18 * static_cast<double>(i);
            svg.circle(482, y - 3.5, 4.0, split_color(splits[i]));
            svg.text(492, y, splits[i], 11, "start");
        }
        spit_file(svg_path, svg.finish());
    } else {
        Svg svg(1060, 680);
        char sub[64];
        std::snprintf(sub, sizeof sub, "classification outcomes at tau = %.3g", tau);
        svg.text(60, 26, sub, 15, "start");
        // TN under TP under FP under FN so the rare classes stay visible.
        std::vector<size_t> order(points.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (int j = 0; j < data::kNumTargets; ++j) {
            const Panel p{60.0 + 340.0 * (j % 3), 70.0 + 300.0 * (j / 3), 280, 230};
            const Scale sx{xlo, xhi, p.x, p.x + p.w};
            const Scale sy{ylo, yhi, p.y + p.h, p.y};
            draw_frame(svg, p, sx, sy, spec.endpoints[static_cast<size_t>(j)].name,
                       j / 3 == 1 ? "component 1" : "", j % 3 == 0 ? "component 2" : "");
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return points[a].cls[static_cast<size_t>(j)] < points[b].cls[static_cast<size_t>(j)];
            });
            for (size_t i : order) {
                const int c = points[i].cls[static_cast<size_t>(j)];
                const char* fill = (c >= 0 && c < 4) ? kClassColor[static_cast<size_t>(c)] : "#797979";
                svg.circle(sx(points[i].x), sy(points[i].y), 2.2, fill);
            }
        }
        for (size_t c = 0; c < 4; ++c) {
            const double x = 60 + 250 * static_cast<double>(c);
            svg.circle(x, 42.5, 4.0, kClassColor[c]);
            svg.text(x + 10, 46, kClassName[c], 11, "start");
        }
        spit_file(svg_path, svg.finish());
    }

    CsvTable t;
    t.header = {"record_id", "x", "y", "split"};
    if (color_errors)
        for (const auto& ep : spec.endpoints) t.header.push_back("cls_" + ep.name);
    for (const auto& pt : points) {
        std::vector<std::string> row = {pt.record_id, format_double(pt.x), format_double(pt.y),
                                        pt.split};
        if (color_errors)
            for (int j = 0; j < data::kNumTargets; ++j)
                row.push_back(std::to_string(pt.cls[static_cast<size_t>(j)]));
        t.rows.push_back(std::move(row));
    }
    write_csv(csv_path, t);
}

}  // namespace shdbench::cli
