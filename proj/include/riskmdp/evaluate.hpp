#pragma once

#include "riskmdp/gridworld.hpp"
#include "riskmdp/mdp.hpp"
#include "riskmdp/planner.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace riskmdp {

struct TrajectoryStep {
    int state = 0;
    int action = 0;
    double cost = 0.0;
    std::vector<double> constraint_cost;
    bool collision = false;
};

struct Trajectory {
    int initial_state = 0;
    std::vector<TrajectoryStep> steps;
    double discounted_cost = 0.0;
    std::vector<double> discounted_constraint_cost;
    bool reached_absorbing = false; // goal absorption before the step limit
    bool collided = false;          // entered a hazard state at any step
};

/// Rolls one episode: s0 ~ kappa0, actions from the policy, successors
/// sampled from the transition kernel. Stops at a zero-cost absorbing
/// state or after max_steps. `hazards` marks states whose entry counts
/// as a collision. Deterministic per seed.
Trajectory simulate(const Mdp& mdp, const Policy& policy, std::uint64_t seed,
                    int max_steps = 400, const std::set<int>& hazards = {});

struct CostSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
};

/// Metadata echoed into reports (grid size, measure, budgets, timing).
struct EvaluationContext {
    std::string measure = "";
    double epsilon = 0.0;
    std::vector<double> beta;
    double lower_bound = 0.0;
    double solve_seconds = 0.0;
};

struct EvaluationReport {
    int runs = 0;
    double perturb_prob = 0.0;
    std::uint64_t seed = 0;
    int grid_width = 0;
    int grid_height = 0;
    int uncertain_obstacles = 0;
    double failure_rate = 0.0; // fraction of runs with at least one collision
    int truncated_runs = 0;    // hit max_steps without absorbing
    CostSummary objective;
    std::vector<CostSummary> constraints;
    EvaluationContext context;
    std::vector<double> per_run_cost; // discounted objective per run
};

/// Runs `runs` episodes; each run independently perturbs the uncertain
/// obstacles, rebuilds the MDP, and simulates. Fan-out is parallel over
/// worker threads (capped by RISKMDP_THREADS) with per-run derived seeds,
/// so reports are identical regardless of thread count.
EvaluationReport monte_carlo_report(const GridConfig& grid, const Policy& policy, int runs,
                                    double perturb_prob, std::uint64_t seed,
                                    int max_steps = 400, double discount = 0.95,
                                    const EvaluationContext& context = {});

std::string write_report_json(const EvaluationReport& report,
                              const std::string& manifest_hash = "");
/// One Table-style CSV line per report: measure, grid, bound, solve time,
/// uncertain obstacle count, failure rate.
std::string report_csv_header();
std::string report_csv_line(const EvaluationReport& report);

} // namespace riskmdp
