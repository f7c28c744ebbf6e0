#include "protovae/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "protovae/error.hpp"

namespace protovae::cli {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr double kMargin = 0.05;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string px(double v) { return fmt("%.2f", v); }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) throw DomainError("plot: non-finite coordinate");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Widened by 5% of the span on each side; a degenerate span gets +-0.5.
    Range padded() const {
        if (!(lo <= hi)) return {0.0, 1.0};
        const double span = hi - lo;
        if (span == 0.0) return {lo - 0.5, hi + 0.5};
        return {lo - kMargin * span, hi + kMargin * span};
    }
};

class Canvas {
public:
    Canvas(Range x, Range y) : x_(x.padded()), y_(y.padded()) {}

    double sx(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
    double sy(double v) const { return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

    std::string open(const std::string& title, const std::string& x_label, const std::string& y_label) const {
        std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" +
                        px(kHeight) + "\" viewBox=\"0 0 " + px(kWidth) + " " + px(kHeight) + "\">\n";
        s += "<style>text{font-family:sans-serif;font-size:12px}</style>\n";
        if (!title.empty()) {
            s += "<text x=\"" + px(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\">" + escape(title) + "</text>\n";
        }
        const double x0 = kLeft, x1 = kWidth - kRight, y0 = kTop, y1 = kHeight - kBottom;
        s += "<polyline fill=\"none\" stroke=\"#000\" points=\"" + px(x0) + "," + px(y0) + " " + px(x0) + "," + px(y1) +
             " " + px(x1) + "," + px(y1) + "\"/>\n";
        s += tick_label(x0, y1 + 16, x_.lo, "start") + tick_label(x1, y1 + 16, x_.hi, "end");
        s += tick_label(x0 - 6, y1, y_.lo, "end") + tick_label(x0 - 6, y0 + 10, y_.hi, "end");
        s += "<text x=\"" + px((x0 + x1) / 2) + "\" y=\"" + px(kHeight - 12) + "\" text-anchor=\"middle\">" +
             escape(x_label) + "</text>\n";
        s += "<text x=\"16\" y=\"" + px((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
             px((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
        s += "<g class=\"plot-area\" data-x-min=\"" + fmt("%.17g", x_.lo) + "\" data-x-max=\"" + fmt("%.17g", x_.hi) +
             "\" data-y-min=\"" + fmt("%.17g", y_.lo) + "\" data-y-max=\"" + fmt("%.17g", y_.hi) + "\">\n";
        return s;
    }

    static std::string legend(std::size_t row, const std::string& colour, const std::string& label) {
        return "<text x=\"" + px(kWidth - kRight + 12) + "\" y=\"" + px(kTop + 14 + 16 * static_cast<double>(row)) +
               "\" fill=\"" + colour + "\">" + escape(label) + "</text>\n";
    }

private:
    static std::string tick_label(double x, double y, double v, const char* anchor) {
        return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" text-anchor=\"" + anchor + "\">" + fmt("%.4g", v) +
               "</text>\n";
    }

    Range x_, y_;
};

const char* colour(std::int32_t label) {
    const auto n = static_cast<std::int32_t>(std::size(kPalette));
    return label < 0 ? "#000000" : kPalette[label % n];
}

}  // namespace

std::string render_projection_plot(const numgrad::Tensor& coords, std::span<const std::int32_t> labels,
                                   const numgrad::Tensor& prototypes, const std::string& title) {
    if (coords.rank() != 2 || coords.cols() != 2) throw ShapeError("projection plot: coordinates must be n x 2");
    if (labels.size() != coords.rows()) throw ShapeError("projection plot: one label per point");
    const bool have_protos = !prototypes.empty();
    if (have_protos && (prototypes.rank() != 2 || prototypes.cols() != 2)) {
        throw ShapeError("projection plot: prototypes must be m x 2");
    }
    Range xr, yr;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        xr.add(coords(i, 0));
        yr.add(coords(i, 1));
    }
    if (have_protos) {
        for (std::size_t i = 0; i < prototypes.rows(); ++i) {
            xr.add(prototypes(i, 0));
            yr.add(prototypes(i, 1));
        }
    }
    const Canvas canvas(xr, yr);
    std::string s = canvas.open(title, "PC1", "PC2");
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        s += "<circle cx=\"" + px(canvas.sx(coords(i, 0))) + "\" cy=\"" + px(canvas.sy(coords(i, 1))) +
             "\" r=\"2.5\" fill=\"" + colour(labels[i]) + "\" fill-opacity=\"0.6\"/>\n";
    }
    if (have_protos) {
        for (std::size_t i = 0; i < prototypes.rows(); ++i) {
            s += "<rect x=\"" + px(canvas.sx(prototypes(i, 0)) - 3) + "\" y=\"" + px(canvas.sy(prototypes(i, 1)) - 3) +
                 "\" width=\"6\" height=\"6\" fill=\"#000000\"/>\n";
        }
    }
    s += "</g>\n";
    std::vector<std::int32_t> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::size_t row = 0;
    for (std::int32_t l : distinct) s += Canvas::legend(row++, colour(l), l < 0 ? "unlabeled" : "class " + std::to_string(l));
    if (have_protos) s += Canvas::legend(row, "#000000", "pseudo-inputs");
    s += "</svg>\n";
    return s;
}

std::string render_line_plot(std::span<const LineSeries> series, const std::string& x_label,
                             const std::string& y_label, const std::string& title) {
    Range xr, yr;
    for (const auto& ser : series) {
        if (ser.x.size() != ser.y.size()) throw ShapeError("line plot: series '" + ser.name + "' has ragged x/y");
        for (double v : ser.x) xr.add(v);
        for (double v : ser.y) yr.add(v);
    }
    const Canvas canvas(xr, yr);
    std::string s = canvas.open(title, x_label, y_label);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto col = colour(static_cast<std::int32_t>(k));
        std::string pts;
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (i) pts += ' ';
            pts += px(canvas.sx(series[k].x[i])) + "," + px(canvas.sy(series[k].y[i]));
        }
        s += std::string("<polyline fill=\"none\" stroke=\"") + col + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            s += "<circle cx=\"" + px(canvas.sx(series[k].x[i])) + "\" cy=\"" + px(canvas.sy(series[k].y[i])) +
                 "\" r=\"3\" fill=\"" + col + "\"/>\n";
        }
    }
    s += "</g>\n";
    for (std::size_t k = 0; k < series.size(); ++k) s += Canvas::legend(k, colour(static_cast<std::int32_t>(k)), series[k].name);
    s += "</svg>\n";
    return s;
}

}  // namespace protovae::cli
