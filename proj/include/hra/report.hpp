#pragma once

#include "hra/error.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hra::report {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Series {
    std::string name;
    std::vector<Point> points;
};

// A straight reference line through two points, drawn across the plot.
struct Line {
    Point from;
    Point to;
};

struct ScatterPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::optional<Line> reference;
};

// Fixed-size SVG with axes, ticks and one marker style per series. Output
// depends only on the plot contents.
std::string render_svg(const ScatterPlot& plot);

// series,x,y rows.
std::string render_csv(const ScatterPlot& plot);

// Residuals against standard normal quantiles at (i - 3/8) / (n + 1/4).
// x = residual, y = z; the reference line is x = mean + sd * z.
ScatterPlot normal_plot(std::span<const double> residuals, std::string title);

class MissingArtifacts : public InputError {
public:
    explicit MissingArtifacts(std::vector<std::filesystem::path> missing);
    const std::vector<std::filesystem::path>& missing() const noexcept { return missing_; }

private:
    std::vector<std::filesystem::path> missing_;
};

// Reads a pipeline result directory and writes <dir>/report/*.svg plus a CSV
// next to each. Returns the written files in order.
std::vector<std::filesystem::path> generate(const std::filesystem::path& result_dir);

}  // namespace hra::report
