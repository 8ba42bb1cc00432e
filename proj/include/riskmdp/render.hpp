#pragma once

#include "riskmdp/gridworld.hpp"
#include "riskmdp/planner.hpp"

#include <string>
#include <vector>

namespace riskmdp {

/// Static SVG of a solved grid: per-cell value heatmap, one arrow glyph per
/// non-goal cell for the policy action, obstacle and goal markers. Output is
/// byte-deterministic for fixed inputs. Throws on a grid/plan size mismatch.
std::string render_svg(const GridConfig& grid, const std::vector<double>& values,
                       const Policy& policy);

} // namespace riskmdp
