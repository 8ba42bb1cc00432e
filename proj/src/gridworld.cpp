#include "riskmdp/gridworld.hpp"
#include "riskmdp/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace riskmdp {

namespace {

// Deltas in the declared action order E, W, N, S, NE, NW, SE, SW.
// North is +y; row y = 0 is the bottom of the grid.
constexpr Cell kDeltas[kGridActions] = {
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
constexpr const char* kNames[kGridActions] = {"E", "W", "N", "S", "NE", "NW", "SE", "SW"};

// Compass ring in angular order, used to find the two flanking headings.
constexpr int kRing[8] = {0 /*E*/, 4 /*NE*/, 2 /*N*/, 5 /*NW*/, 1 /*W*/, 7 /*SW*/, 3 /*S*/, 6 /*SE*/};

int ring_position(int action) {
    for (int i = 0; i < 8; ++i)
        if (kRing[i] == action) return i;
    throw std::out_of_range("bad action");
}

bool is_diagonal(int action) { return action >= 4; }

} // namespace

Cell action_delta(int action) {
    if (action < 0 || action >= kGridActions) throw std::out_of_range("bad action");
    return kDeltas[action];
}

const char* action_name(int action) {
    if (action < 0 || action >= kGridActions) throw std::out_of_range("bad action");
    return kNames[action];
}

Cell start_cell(const GridConfig& config) { return {config.width - 1, 0}; }

double GridConfig::obstacle_fraction() const {
    if (width <= 0 || height <= 0) return 0.0;
    return static_cast<double>(obstacles.size()) / (static_cast<double>(width) * height);
}

void validate_grid(const GridConfig& config) {
    if (config.width <= 0 || config.height <= 0)
        throw std::invalid_argument("grid: width and height must be positive");
    if (!config.in_grid(config.goal))
        throw std::invalid_argument("grid: goal out of range");
    if (config.obstacles.count(config.goal))
        throw std::invalid_argument("grid: goal cell is an obstacle");
    for (const Cell& c : config.obstacles)
        if (!config.in_grid(c))
            throw std::invalid_argument("grid: obstacle out of range");
    for (const Cell& c : config.uncertain_obstacles)
        if (!config.obstacles.count(c))
            throw std::invalid_argument("grid: uncertain obstacle not in obstacle set");
    if (!(config.move_cost >= 0.0 && config.obstacle_cost >= 0.0 && config.goal_cost >= 0.0))
        throw std::invalid_argument("grid: costs must be non-negative");
}

Mdp build_gridworld(const GridConfig& config, double discount) {
    validate_grid(config);
    if (!(discount > 0.0 && discount < 1.0))
        throw std::invalid_argument("grid: discount outside (0,1)");

    const int n = config.width * config.height;
    Mdp mdp;
    mdp.num_states = n;
    mdp.num_actions = kGridActions;
    mdp.discount = discount;
    mdp.transition.resize(n);
    mdp.cost.assign(n, std::vector<double>(kGridActions, 0.0));
    mdp.constraint_costs.assign(1, std::vector<std::vector<double>>(
                                       n, std::vector<double>(kGridActions, 0.0)));
    mdp.initial_distribution.assign(n, 0.0);
    mdp.initial_distribution[config.cell_index(start_cell(config))] = 1.0;

    const int goal = config.cell_index(config.goal);

    for (int s = 0; s < n; ++s) {
        const Cell here = config.cell_at(s);
        const bool on_obstacle = config.obstacles.count(here) > 0;
        mdp.transition[s].reserve(kGridActions);
        for (int a = 0; a < kGridActions; ++a) {
            if (s == goal) {
                mdp.transition[s].push_back(DiscreteDistribution::point_mass(goal));
                continue; // absorbing, zero costs
            }
            mdp.cost[s][a] = on_obstacle ? config.obstacle_cost : 0.0;
            mdp.constraint_costs[0][s][a] = config.move_cost;

            // Target mass 1 - p, flanking headings p / 2 each; any mass
            // whose destination leaves the grid stays in place.
            const double p = is_diagonal(a) ? config.slip.diagonal : config.slip.cardinal;
            const int pos = ring_position(a);
            const int flank_left = kRing[(pos + 1) % 8];
            const int flank_right = kRing[(pos + 7) % 8];

            std::map<int, double> mass;
            auto deposit = [&](int action, double prob) {
                Cell to{here.x + kDeltas[action].x, here.y + kDeltas[action].y};
                int dest = config.in_grid(to) ? config.cell_index(to) : s;
                mass[dest] += prob;
            };
            deposit(a, 1.0 - p);
            deposit(flank_left, p / 2.0);
            deposit(flank_right, p / 2.0);

            std::vector<int> support;
            std::vector<double> probs;
            for (const auto& [state, prob] : mass) {
                support.push_back(state);
                probs.push_back(prob);
            }
            mdp.transition[s].emplace_back(std::move(support), std::move(probs));
        }
    }
    return mdp;
}

GridConfig perturb_obstacles(const GridConfig& config, double prob, std::uint64_t seed) {
    if (!(prob >= 0.0 && prob <= 1.0))
        throw std::invalid_argument("perturb_obstacles: prob outside [0,1]");
    GridConfig out = config;
    if (config.uncertain_obstacles.empty() || prob == 0.0) return out;

    std::mt19937_64 rng(seed);
    std::set<Cell> moved_from;
    std::set<Cell> destinations;
    std::set<Cell> new_uncertain;

    // Set iteration is sorted, so draws are consumed in a fixed order.
    for (const Cell& c : config.uncertain_obstacles) {
        double u = next_double(rng);
        if (u >= prob) {
            new_uncertain.insert(c);
            continue;
        }
        std::vector<Cell> neighbors;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                Cell to{c.x + dx, c.y + dy};
                if (config.in_grid(to) && !(to == config.goal)) neighbors.push_back(to);
            }
        }
        if (neighbors.empty()) {
            new_uncertain.insert(c);
            continue;
        }
        Cell to = neighbors[pick_index(rng, neighbors.size())];
        moved_from.insert(c);
        destinations.insert(to);
        new_uncertain.insert(to);
    }
    // a vacated cell stays occupied if another obstacle lands on it
    out.obstacles.clear();
    for (const Cell& c : config.obstacles)
        if (!moved_from.count(c)) out.obstacles.insert(c);
    for (const Cell& c : destinations) out.obstacles.insert(c);
    out.uncertain_obstacles.clear();
    for (const Cell& c : new_uncertain)
        if (out.obstacles.count(c)) out.uncertain_obstacles.insert(c);
    return out;
}

GridConfig generate_grid(int width, int height, double obstacle_fraction,
                         int uncertain, std::uint64_t seed) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("generate_grid: empty grid");
    if (!(obstacle_fraction >= 0.0 && obstacle_fraction < 1.0))
        throw std::invalid_argument("generate_grid: obstacle fraction outside [0,1)");

    GridConfig config;
    config.width = width;
    config.height = height;
    config.goal = {0, height - 1};
    const Cell start = start_cell(config);

    const int n = width * height;
    int target = static_cast<int>(std::lround(obstacle_fraction * n));
    target = std::min(target, n - 2); // keep start and goal free

    std::vector<Cell> candidates;
    candidates.reserve(n);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            Cell c{x, y};
            if (c == config.goal || c == start) continue;
            candidates.push_back(c);
        }
    std::mt19937_64 rng(seed);
    for (std::size_t i = candidates.size(); i > 1; --i)
        std::swap(candidates[i - 1], candidates[pick_index(rng, i)]);
    for (int k = 0; k < target && k < static_cast<int>(candidates.size()); ++k)
        config.obstacles.insert(candidates[k]);

    // Uncertain obstacles: prefer cells near the start-goal line so the
    // robustness perturbation actually interacts with plausible paths.
    std::vector<Cell> placed(config.obstacles.begin(), config.obstacles.end());
    auto line_distance = [&](Cell c) {
        double dx = config.goal.x - start.x, dy = config.goal.y - start.y;
        double len = std::hypot(dx, dy);
        if (len == 0.0) return 0.0;
        return std::fabs(dy * (c.x - start.x) - dx * (c.y - start.y)) / len;
    };
    std::stable_sort(placed.begin(), placed.end(), [&](Cell a, Cell b) {
        return line_distance(a) < line_distance(b);
    });
    uncertain = std::min<int>(uncertain, static_cast<int>(placed.size()));
    for (int k = 0; k < uncertain; ++k) config.uncertain_obstacles.insert(placed[k]);
    return config;
}

using nlohmann::json;

namespace {

json cells_to_json(const std::set<Cell>& cells) {
    json arr = json::array();
    for (const Cell& c : cells) arr.push_back({c.x, c.y});
    return arr;
}

std::set<Cell> cells_from_json(const json& arr) {
    std::set<Cell> out;
    for (const auto& item : arr) out.insert({item.at(0).get<int>(), item.at(1).get<int>()});
    return out;
}

} // namespace

std::string write_grid_json(const GridConfig& config) {
    json doc;
    doc["width"] = config.width;
    doc["height"] = config.height;
    doc["obstacles"] = cells_to_json(config.obstacles);
    doc["uncertain_obstacles"] = cells_to_json(config.uncertain_obstacles);
    doc["goal"] = {config.goal.x, config.goal.y};
    doc["slip"] = {{"cardinal", config.slip.cardinal}, {"diagonal", config.slip.diagonal}};
    doc["move_cost"] = config.move_cost;
    doc["obstacle_cost"] = config.obstacle_cost;
    doc["goal_cost"] = config.goal_cost;
    return doc.dump(2);
}

GridConfig read_grid_json(const std::string& text) {
    json doc = json::parse(text);
    GridConfig config;
    config.width = doc.at("width").get<int>();
    config.height = doc.at("height").get<int>();
    config.obstacles = cells_from_json(doc.at("obstacles"));
    config.uncertain_obstacles = cells_from_json(doc.at("uncertain_obstacles"));
    config.goal = {doc.at("goal").at(0).get<int>(), doc.at("goal").at(1).get<int>()};
    config.slip.cardinal = doc.at("slip").at("cardinal").get<double>();
    config.slip.diagonal = doc.at("slip").at("diagonal").get<double>();
    config.move_cost = doc.at("move_cost").get<double>();
    config.obstacle_cost = doc.at("obstacle_cost").get<double>();
    config.goal_cost = doc.at("goal_cost").get<double>();
    return config;
}

void write_grid_file(const GridConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << write_grid_json(config) << "\n";
}

GridConfig read_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return read_grid_json(buffer.str());
}

} // namespace riskmdp
