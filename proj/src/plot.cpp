#include "cdrlab/plot.hpp"

#include "cdrlab/analysis.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace cdrlab {

namespace {

struct Table {
    std::string columns;
    std::vector<std::vector<double>> rows;

    std::vector<double> col(std::size_t c) const {
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r[c]);
        return v;
    }
};

Table parse_csv(std::string_view text) {
    Table t;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        if (t.columns.empty()) {
            t.columns = std::string(line);
            continue;
        }
        std::vector<double> row;
        std::size_t a = 0;
        while (a <= line.size()) {
            auto b = line.find(',', a);
            if (b == std::string_view::npos) b = line.size();
            const std::string cell(line.substr(a, b - a));
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            // Non-numeric cells (oracle table labels) read as NaN.
            row.push_back(end == cell.c_str() ? std::numeric_limits<double>::quiet_NaN() : v);
            a = b + 1;
        }
        if (!t.rows.empty() && row.size() != t.rows.front().size())
            throw ConfigError("plot: line " + std::to_string(line_no) + " has a different column count");
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) throw ConfigError("plot: no column header");
    if (t.rows.empty()) throw ConfigError("plot: no data rows");
    return t;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

// Finite min/max with a little headroom; degenerate ranges are widened.
std::pair<double, double> span_of(const std::vector<double>& v, double pad = 0.05) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : v)
        if (std::isfinite(x)) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (!std::isfinite(lo)) return {0.0, 1.0};
    if (hi - lo < 1e-300) {
        const double d = std::max(std::abs(lo) * 0.1, 1e-12);
        return {lo - d, hi + d};
    }
    const double d = (hi - lo) * pad;
    return {lo - d, hi + d};
}

class Svg {
public:
    Svg(int w, int h) : w_(w), h_(h) {}

    void raw(const std::string& s) { body_ += s; }
    void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12) {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
                 "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "#000") {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                 "\" stroke=\"" + stroke + "\"/>\n";
    }
    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w_) + "\" height=\"" +
               std::to_string(h_) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" +
               body_ + "</svg>\n";
    }

private:
    int w_, h_;
    std::string body_;
};

// A rectangular plot area with linear axes.
struct Panel {
    double x0, y0, w, h;
    double xmin, xmax, ymin, ymax;

    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }

    void axes(Svg& s, const std::string& xlabel, const std::string& ylabel) const {
        s.raw("<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
              "\" fill=\"none\" stroke=\"#000\"/>\n");
        for (int i = 0; i <= 4; ++i) {
            const double fx = xmin + (xmax - xmin) * i / 4.0;
            const double fy = ymin + (ymax - ymin) * i / 4.0;
            s.line(px(fx), y0 + h, px(fx), y0 + h + 4);
            s.text(px(fx), y0 + h + 16, label(fx));
            s.line(x0 - 4, py(fy), x0, py(fy));
            s.text(x0 - 6, py(fy) + 4, label(fy), "end");
        }
        s.text(x0 + w / 2, y0 + h + 34, xlabel);
        s.raw("<text x=\"" + num(x0 - 58) + "\" y=\"" + num(y0 + h / 2) + "\" font-size=\"12\" text-anchor=\"middle\" "
              "transform=\"rotate(-90 " + num(x0 - 58) + " " + num(y0 + h / 2) + ")\">" + escape(ylabel) + "</text>\n");
    }

    void polyline(Svg& s, const std::vector<double>& x, const std::vector<double>& y, const char* stroke) const {
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                s.raw("<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n");
            pts.clear();
        };
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
                flush();
                continue;
            }
            pts += num(px(x[i])) + "," + num(py(y[i])) + " ";
        }
        flush();
    }

    void bars(Svg& s, const std::vector<double>& x, const std::vector<double>& y, const char* fill) const {
        const double bw = x.size() > 1 ? std::max(1.0, w / static_cast<double>(x.size())) : w;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(y[i] > 0.0)) continue;
            s.raw("<rect x=\"" + num(px(x[i]) - bw / 2) + "\" y=\"" + num(py(y[i])) + "\" width=\"" + num(bw) +
                  "\" height=\"" + num(py(ymin) - py(y[i])) + "\" fill=\"" + fill + "\"/>\n");
        }
    }
};

std::string plot_sweep(const Table& t) {
    SweepCurve curve;
    for (const auto& r : t.rows) {
        SweepPoint p;
        p.v_off = r[0] * 1e-3;
        p.eff_threshold = r[1] * 1e-3;
        p.pk_pk_ui = r[2] / 100.0;
        p.locked = r[3] != 0.0;
        curve.points.push_back(p);
    }
    const auto x = t.col(0), y = t.col(2);
    const auto [xmin, xmax] = span_of(x, 0.02);
    auto [ymin, ymax] = span_of(y);
    ymin = std::min(ymin, 0.0);
    Svg s(720, 440);
    const Panel p{80, 30, 610, 340, xmin, xmax, ymin, ymax};
    p.axes(s, "offset voltage (mV)", "recovered clock jitter pk-pk (% UI)");
    p.polyline(s, x, y, "#1f4e9c");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i])) continue;
        s.raw("<circle cx=\"" + num(p.px(x[i])) + "\" cy=\"" + num(p.py(y[i])) + "\" r=\"2.5\" fill=\"#1f4e9c\"/>\n");
    }
    for (auto i : local_minima(curve)) {
        s.raw("<circle cx=\"" + num(p.px(x[i])) + "\" cy=\"" + num(p.py(y[i])) +
              "\" r=\"6\" fill=\"none\" stroke=\"#c62828\" stroke-width=\"2\"/>\n");
        s.text(p.px(x[i]), p.py(y[i]) + 20, label(x[i]) + " mV");
    }
    return s.str();
}

std::string plot_eye(const Table& t) {
    const auto tt = t.col(0), vv = t.col(1), cc = t.col(2);
    std::vector<double> ts = tt, vs = vv;
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    const double dt = ts.size() > 1 ? ts[1] - ts[0] : 1.0;
    const double dv = vs.size() > 1 ? vs[1] - vs[0] : 1.0;
    const double cmax = std::max(1.0, *std::max_element(cc.begin(), cc.end()));
    Svg s(720, 480);
    const Panel p{80, 30, 610, 380, ts.front() - dt / 2, ts.back() + dt / 2, vs.front() - dv / 2, vs.back() + dv / 2};
    const double cw = p.px(ts.front() + dt) - p.px(ts.front()) + 0.5;
    const double ch = p.py(vs.front()) - p.py(vs.front() + dv) + 0.5;
    for (std::size_t i = 0; i < tt.size(); ++i) {
        if (!(cc[i] > 0.0)) continue;
        // Log intensity so sparse transition traces stay visible.
        const double a = std::log1p(cc[i]) / std::log1p(cmax);
        const int g = static_cast<int>(std::lround(235.0 * (1.0 - a)));
        char fill[16];
        std::snprintf(fill, sizeof fill, "#%02x%02xff", g, g);
        s.raw("<rect x=\"" + num(p.px(tt[i] - dt / 2)) + "\" y=\"" + num(p.py(vv[i] + dv / 2)) + "\" width=\"" +
              num(cw) + "\" height=\"" + num(ch) + "\" fill=\"" + fill + "\"/>\n");
    }
    p.axes(s, "time (UI)", "voltage (mV)");
    return s.str();
}

std::string plot_track(const Table& t) {
    const auto time = t.col(0);
    auto vc = t.col(1), vth = t.col(2);
    std::vector<double> tus(time.size());
    for (std::size_t i = 0; i < time.size(); ++i) tus[i] = time[i] * 1e6;
    for (double& v : vc) v *= 1e3;
    for (double& v : vth) v *= 1e3;
    const auto [xmin, xmax] = span_of(tus, 0.0);
    const auto [c0, c1] = span_of(vc);
    const auto [h0, h1] = span_of(vth);
    Svg s(720, 620);
    const Panel top{90, 30, 600, 230, xmin, xmax, c0, c1};
    const Panel bottom{90, 330, 600, 230, xmin, xmax, h0, h1};
    top.axes(s, "time (us)", "control voltage V_c (mV)");
    top.polyline(s, tus, vc, "#1f4e9c");
    bottom.axes(s, "time (us)", "threshold feedback (mV)");
    bottom.polyline(s, tus, vth, "#c62828");
    return s.str();
}

std::string plot_histogram(const Table& t, const char* xlabel, const char* ylabel) {
    const auto x = t.col(0), y = t.col(1);
    const auto [xmin, xmax] = span_of(x, 0.02);
    auto [ymin, ymax] = span_of(y);
    ymin = 0.0;
    Svg s(720, 440);
    const Panel p{80, 30, 610, 340, xmin, xmax, ymin, ymax};
    p.bars(s, x, y, "#1f4e9c");
    p.axes(s, xlabel, ylabel);
    return s.str();
}

}  // namespace

std::string render_svg(std::string_view csv_text) {
    const Table t = parse_csv(csv_text);
    if (t.columns == kSweepColumns) return plot_sweep(t);
    if (t.columns == kEyeColumns) return plot_eye(t);
    if (t.columns == kTrackColumns) return plot_track(t);
    if (t.columns == kCrossingColumns) return plot_histogram(t, "crossing phase (UI)", "count");
    if (t.columns == kOracleColumns) return plot_histogram(t, "edge phase (UI)", "stationary probability");
    throw ConfigError("plot: unrecognised CSV schema '" + t.columns + "'");
}

}  // namespace cdrlab
