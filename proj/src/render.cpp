#include "riskmdp/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace riskmdp {

namespace {

constexpr int kCell = 32;
constexpr int kMargin = 8;

struct Rgb {
    int r, g, b;
};

// low values cold, high values warm
Rgb heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const Rgb lo{33, 102, 172};   // blue
    const Rgb mid{247, 247, 247}; // near white
    const Rgb hi{178, 24, 43};    // red
    auto lerp = [](int a, int b, double w) {
        return static_cast<int>(std::lround(a + (b - a) * w));
    };
    if (t < 0.5) {
        double w = t * 2.0;
        return {lerp(lo.r, mid.r, w), lerp(lo.g, mid.g, w), lerp(lo.b, mid.b, w)};
    }
    double w = (t - 0.5) * 2.0;
    return {lerp(mid.r, hi.r, w), lerp(mid.g, hi.g, w), lerp(mid.b, hi.b, w)};
}

std::string fmt(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", x);
    return buffer;
}

// arrow rotation in degrees per action, matching the E,W,N,S,NE,NW,SE,SW
// order (SVG y axis points down; grid rows render bottom-up)
constexpr double kAngle[kGridActions] = {0, 180, -90, 90, -45, -135, 45, 135};

} // namespace

std::string render_svg(const GridConfig& grid, const std::vector<double>& values,
                       const Policy& policy) {
    validate_grid(grid);
    const int n = grid.width * grid.height;
    if (static_cast<int>(values.size()) != n || static_cast<int>(policy.size()) != n)
        throw std::invalid_argument("render: grid and plan dimensions do not match");

    double vmin = *std::min_element(values.begin(), values.end());
    double vmax = *std::max_element(values.begin(), values.end());
    double span = vmax - vmin > 1e-12 ? vmax - vmin : 1.0;

    const int width = grid.width * kCell + 2 * kMargin;
    const int height = grid.height * kCell + 2 * kMargin;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";

    const int goal_index = grid.cell_index(grid.goal);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            Cell cell{x, y};
            int s = grid.cell_index(cell);
            // row y = 0 is the bottom of the grid
            int px = kMargin + x * kCell;
            int py = kMargin + (grid.height - 1 - y) * kCell;
            std::string fill;
            if (s == goal_index) {
                fill = "#f4d03f";
            } else if (grid.obstacles.count(cell)) {
                fill = grid.uncertain_obstacles.count(cell) ? "#2e86c1" : "#1b4f72";
            } else {
                Rgb c = heat_color((values[s] - vmin) / span);
                char buffer[16];
                std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x", c.r, c.g, c.b);
                fill = buffer;
            }
            svg << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << kCell
                << "\" height=\"" << kCell << "\" fill=\"" << fill
                << "\" stroke=\"#555555\" stroke-width=\"1\">";
            svg << "<title>(" << x << "," << y << ") value=" << fmt(values[s]) << "</title>";
            svg << "</rect>\n";
            if (s == goal_index) continue; // absorbing: no arrow
            double cx = px + kCell / 2.0;
            double cy = py + kCell / 2.0;
            svg << "<g transform=\"translate(" << fmt(cx) << " " << fmt(cy) << ") rotate("
                << fmt(kAngle[policy[s]]) << ")\">"
                << "<path class=\"arrow\" d=\"M -8 0 L 5 0 M 5 0 L 1 -4 M 5 0 L 1 4\" "
                   "stroke=\"#111111\" stroke-width=\"1.8\" fill=\"none\"/></g>\n";
        }
    }
    // legend strip
    svg << "<text x=\"" << kMargin << "\" y=\"" << height - 1
        << "\" font-size=\"7\" fill=\"#333333\">value " << fmt(vmin) << " (blue) to "
        << fmt(vmax) << " (red)</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace riskmdp
