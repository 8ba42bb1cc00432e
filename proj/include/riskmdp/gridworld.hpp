#pragma once

#include "riskmdp/mdp.hpp"

#include <cstdint>
#include <set>
#include <string>

namespace riskmdp {

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

/// Per-action transition noise. An action reaches the intended cell with
/// probability 1 - p, and each of the two cells flanking the intended
/// heading with p / 2. Cardinal and diagonal moves carry separate p.
struct SlipModel {
    double cardinal = 0.2;
    double diagonal = 0.4;
};

/// Rover grid of width M by height N, cells indexed s = x + M * y with
/// x in [0, M), y in [0, N). The agent starts at the bottom-right cell
/// (M - 1, 0). Obstacles are enterable penalty cells, not walls.
struct GridConfig {
    int width = 0;
    int height = 0;
    std::set<Cell> obstacles;
    std::set<Cell> uncertain_obstacles; // subset of obstacles, single cells
    Cell goal;
    SlipModel slip;
    double move_cost = 2.0;
    double obstacle_cost = 10.0;
    double goal_cost = 0.0;

    int cell_index(Cell c) const { return c.x + width * c.y; }
    Cell cell_at(int index) const { return {index % width, index / width}; }
    bool in_grid(Cell c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
    double obstacle_fraction() const;
};

/// Action order matches the compass naming E, W, N, S, NE, NW, SE, SW.
inline constexpr int kGridActions = 8;
Cell action_delta(int action);
const char* action_name(int action);

Cell start_cell(const GridConfig& config);

/// Throws std::invalid_argument when config invariants are violated
/// (empty grid, goal out of range or on an obstacle, stray uncertain cell).
void validate_grid(const GridConfig& config);

/// Builds the grid MDP: goal absorbing with zero costs, objective cost
/// `obstacle_cost` while on an obstacle cell, one constraint cost
/// `move_cost` on every non-goal state, off-grid slip mass redirected to
/// staying in place.
Mdp build_gridworld(const GridConfig& config, double discount = 0.95);

/// Independently relocates each uncertain obstacle, with probability
/// `prob`, to a uniformly chosen in-grid neighbor cell other than the
/// goal. Deterministic for a fixed seed.
GridConfig perturb_obstacles(const GridConfig& config, double prob, std::uint64_t seed);

/// Seeded random layout with the requested obstacle fraction; start and
/// goal cells are kept free. `uncertain` of the obstacles are marked
/// uncertain (the ones nearest the goal-start diagonal are preferred so
/// they matter for robustness runs).
GridConfig generate_grid(int width, int height, double obstacle_fraction,
                         int uncertain, std::uint64_t seed);

std::string write_grid_json(const GridConfig& config);
GridConfig read_grid_json(const std::string& text);
void write_grid_file(const GridConfig& config, const std::string& path);
GridConfig read_grid_file(const std::string& path);

} // namespace riskmdp
