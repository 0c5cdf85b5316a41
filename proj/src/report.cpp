#include "hra/report.hpp"

#include "hra/format.hpp"
#include "hra/pipeline.hpp"
#include "hra/stats.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hra::report {

namespace {

constexpr double kWidth = 520.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 78.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 58.0;
constexpr const char* kPalette[] = {"#1f5fa8", "#c8402f", "#2e8b4f", "#8a5aa8"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v + 0.0);
    return buf;
}

std::string tick_label(double v) {
    if (std::fabs(v) < 1e-300) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
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

struct Range {
    double lo;
    double hi;
};

Range padded(double lo, double hi) {
    if (!(lo <= hi)) return {0.0, 1.0};
    if (hi - lo <= 1e-12 * std::max(1.0, std::fabs(hi))) {
        const double half = lo == 0.0 ? 1.0 : std::fabs(lo) * 0.1;
        return {lo - half, hi + half};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

double nice_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

std::vector<double> ticks(Range r) {
    const double step = nice_step(r.hi - r.lo);
    std::vector<double> out;
    for (double k = std::ceil(r.lo / step); k * step <= r.hi + 1e-9 * step; k += 1.0) out.push_back(k * step);
    return out;
}

// Clips the infinite line through `line` to the box; nullopt if it misses.
std::optional<Line> clip(const Line& line, Range xr, Range yr) {
    const double dx = line.to.x - line.from.x;
    const double dy = line.to.y - line.from.y;
    if (dx == 0.0 && dy == 0.0) return std::nullopt;
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    auto bound = [&](double p, double q0, double lo, double hi) {
        if (p == 0.0) return q0 >= lo && q0 <= hi;
        double a = (lo - q0) / p, b = (hi - q0) / p;
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        return t0 <= t1;
    };
    if (!bound(dx, line.from.x, xr.lo, xr.hi) || !bound(dy, line.from.y, yr.lo, yr.hi)) return std::nullopt;
    return Line{{line.from.x + t0 * dx, line.from.y + t0 * dy}, {line.from.x + t1 * dx, line.from.y + t1 * dy}};
}

}  // namespace

std::string render_svg(const ScatterPlot& plot) {
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const auto& s : plot.series) {
        for (const auto& p : s.points) {
            xlo = std::min(xlo, p.x);
            xhi = std::max(xhi, p.x);
            ylo = std::min(ylo, p.y);
            yhi = std::max(yhi, p.y);
        }
    }
    const Range xr = padded(xlo, xhi);
    const Range yr = padded(ylo, yhi);
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
      << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<defs><clipPath id=\"plot-area\"><rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
      << num(pw) << "\" height=\"" << num(ph) << "\"/></clipPath></defs>\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"22.00\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(plot.title) << "</text>\n";
    o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (double t : ticks(xr)) {
        o << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(sx(t)) << "\" y2=\""
          << num(kTop + ph + 5) << "\" stroke=\"#333\"/>";
        o << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
          << tick_label(t) << "</text>\n";
    }
    for (double t : ticks(yr)) {
        o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << num(kLeft) << "\" y2=\""
          << num(sy(t)) << "\" stroke=\"#333\"/>";
        o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">"
          << tick_label(t) << "</text>\n";
    }
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 14) << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
    o << "<text x=\"16.00\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16.00 "
      << num(kTop + ph / 2) << ")\">" << escape(plot.y_label) << "</text>\n";

    if (plot.reference) {
        if (auto seg = clip(*plot.reference, xr, yr)) {
            o << "<line class=\"reference\" x1=\"" << num(sx(seg->from.x)) << "\" y1=\"" << num(sy(seg->from.y))
              << "\" x2=\"" << num(sx(seg->to.x)) << "\" y2=\"" << num(sy(seg->to.y))
              << "\" stroke=\"#777\" stroke-dasharray=\"5 4\" clip-path=\"url(#plot-area)\"/>\n";
        }
    }
    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        o << "<g class=\"series\" fill=\"" << color << "\">\n";
        for (const auto& p : plot.series[s].points)
            o << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y)) << "\" r=\"3.50\"/>\n";
        o << "</g>\n";
        if (plot.series.size() > 1) {
            const double ly = kTop + 14 + 16.0 * static_cast<double>(s);
            o << "<circle cx=\"" << num(kLeft + 12) << "\" cy=\"" << num(ly - 4) << "\" r=\"3.50\" fill=\"" << color
              << "\"/><text x=\"" << num(kLeft + 20) << "\" y=\"" << num(ly) << "\">"
              << escape(plot.series[s].name) << "</text>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

std::string render_csv(const ScatterPlot& plot) {
    std::ostringstream o;
    o << "series,x,y\n";
    for (const auto& s : plot.series)
        for (const auto& p : s.points) o << s.name << ',' << format_full(p.x) << ',' << format_full(p.y) << '\n';
    return o.str();
}

ScatterPlot normal_plot(std::span<const double> residuals, std::string title) {
    std::vector<double> sorted(residuals.begin(), residuals.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    Series s{"residuals", {}};
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double p = (static_cast<double>(i + 1) - 0.375) / (n + 0.25);
        s.points.push_back({sorted[i], stats::normal_quantile(p)});
    }
    double mean = 0.0, sd = 0.0;
    if (!sorted.empty()) {
        mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        if (sorted.size() > 1) {
            double ss = 0.0;
            for (double r : sorted) ss += (r - mean) * (r - mean);
            sd = std::sqrt(ss / (n - 1.0));
        }
    }
    return ScatterPlot{std::move(title), "residual", "normal quantile", {std::move(s)},
                       Line{{mean - 3.0 * sd, -3.0}, {mean + 3.0 * sd, 3.0}}};
}

namespace {

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
    std::string out;
    for (const auto& p : paths) out += (out.empty() ? "" : ", ") + p.generic_string();
    return out;
}

// Columns by header name; every row must be complete and numeric where asked.
class CsvTable {
public:
    explicit CsvTable(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot read " + path.string());
        detail::LineReader reader(in);
        std::string line;
        if (!reader.next(line)) throw InputError(path.string() + ": empty file");
        header_ = detail::split(line, ',');
        while (reader.next(line)) {
            if (detail::trim(line).empty()) continue;
            auto cells = detail::split(line, ',');
            if (cells.size() != header_.size())
                throw InputError(path.string() + " line " + std::to_string(reader.line_number()) +
                                 ": wrong column count");
            rows_.push_back(std::move(cells));
        }
    }

    std::vector<double> numbers(std::string_view column) const {
        const auto it = std::find(header_.begin(), header_.end(), column);
        if (it == header_.end()) throw InputError(path_.string() + ": missing column '" + std::string(column) + "'");
        const auto c = static_cast<std::size_t>(it - header_.begin());
        std::vector<double> out;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            auto v = detail::parse_double(rows_[r][c]);
            if (!v) throw InputError(path_.string() + " row " + std::to_string(r + 1) + ": bad " + std::string(column));
            out.push_back(*v);
        }
        return out;
    }

private:
    std::filesystem::path path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

Series zip(std::string name, const std::vector<double>& x, const std::vector<double>& y) {
    Series s{std::move(name), {}};
    for (std::size_t i = 0; i < x.size(); ++i) s.points.push_back({x[i], y[i]});
    return s;
}

constexpr Line kDiagonal{{0.0, 0.0}, {1.0, 1.0}};

}  // namespace

MissingArtifacts::MissingArtifacts(std::vector<std::filesystem::path> missing)
    : InputError("result directory incomplete; missing: " + join_paths(missing)), missing_(std::move(missing)) {}

std::vector<std::filesystem::path> generate(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> missing;
    for (const char* name : {"summary.csv", "comparison.csv"})
        if (!fs::is_regular_file(dir / name)) missing.push_back(fs::path(name));

    std::vector<std::string> iterations;
    if (fs::is_directory(dir / "iterations")) {
        for (const auto& entry : fs::directory_iterator(dir / "iterations"))
            if (entry.is_directory()) iterations.push_back(entry.path().filename().string());
    }
    std::sort(iterations.begin(), iterations.end());
    if (iterations.empty()) {
        missing.push_back(fs::path("iterations") / "01" / "metrics.csv");
        missing.push_back(fs::path("iterations") / "01" / "fit.csv");
    }
    for (const auto& it : iterations) {
        for (const char* name : {"metrics.csv", "fit.csv"})
            if (!fs::is_regular_file(dir / "iterations" / it / name)) missing.push_back(fs::path("iterations") / it / name);
    }
    if (!missing.empty()) throw MissingArtifacts(std::move(missing));

    const fs::path out_dir = dir / "report";
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    auto emit = [&](const std::string& stem, const ScatterPlot& plot) {
        pipeline::write_file_atomic(out_dir / (stem + ".svg"), render_svg(plot));
        pipeline::write_file_atomic(out_dir / (stem + ".csv"), render_csv(plot));
        written.push_back(out_dir / (stem + ".svg"));
        written.push_back(out_dir / (stem + ".csv"));
    };

    for (const auto& it : iterations) {
        const CsvTable metrics(dir / "iterations" / it / "metrics.csv");
        const CsvTable fit(dir / "iterations" / it / "fit.csv");
        const std::string suffix = " (iteration " + it + ")";

        emit("hep_" + it, ScatterPlot{"Observed vs. predicted HEP" + suffix, "observed HEP", "predicted HEP",
                                      {zip("instances", metrics.numbers("observed_hep"),
                                           metrics.numbers("predicted_hep"))},
                                      kDiagonal});
        emit("residual_normal_" + it, normal_plot(fit.numbers("residual"), "Normal plot of residuals" + suffix));
        emit("residual_vs_fitted_" + it,
             ScatterPlot{"Residuals vs. predicted" + suffix, "predicted (transformed response)", "residual",
                         {zip("runs", fit.numbers("fitted"), fit.numbers("residual"))},
                         Line{{0.0, 0.0}, {1.0, 0.0}}});
        emit("reliability_" + it, ScatterPlot{"Observed vs. predicted reliability" + suffix, "reliability (%)",
                                              "predicted reliability (%)",
                                              {zip("runs", fit.numbers("reliability"),
                                                   fit.numbers("predicted_reliability"))},
                                              kDiagonal});
    }

    const CsvTable comparison(dir / "comparison.csv");
    const auto observed = comparison.numbers("observed_hep");
    emit("comparison", ScatterPlot{"HEP before and after screening", "observed HEP", "predicted HEP",
                                   {zip("before", observed, comparison.numbers("estimated_before")),
                                    zip("after", observed, comparison.numbers("estimated_after"))},
                                   kDiagonal});
    return written;
}

}  // namespace hra::report
