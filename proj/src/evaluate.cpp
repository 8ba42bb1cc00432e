#include "riskmdp/evaluate.hpp"
#include "riskmdp/numfmt.hpp"
#include "riskmdp/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace riskmdp {

namespace {

int sample_state(std::mt19937_64& rng, const std::vector<double>& distribution) {
    double u = next_double(rng);
    double acc = 0.0;
    for (std::size_t s = 0; s < distribution.size(); ++s) {
        acc += distribution[s];
        if (u < acc) return static_cast<int>(s);
    }
    return static_cast<int>(distribution.size()) - 1;
}

int sample_successor(std::mt19937_64& rng, const DiscreteDistribution& dist) {
    double u = next_double(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        acc += dist.probabilities[k];
        if (u < acc) return dist.support[k];
    }
    return dist.support.back();
}

bool absorbing_zero_cost(const Mdp& mdp, int state, int action) {
    const auto& row = mdp.transition[state][action];
    if (row.size() != 1 || row.support[0] != state) return false;
    if (mdp.cost[state][action] != 0.0) return false;
    for (const auto& table : mdp.constraint_costs)
        if (table[state][action] != 0.0) return false;
    return true;
}

CostSummary summarize(std::vector<double> values) {
    CostSummary out;
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    out.mean = total / static_cast<double>(values.size());
    out.min = values.front();
    out.max = values.back();
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(values.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        double w = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - w) + values[hi] * w;
    };
    out.p50 = quantile(0.5);
    out.p90 = quantile(0.9);
    return out;
}

unsigned worker_count(int runs) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RISKMDP_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
    }
    return std::min<unsigned>(hw, static_cast<unsigned>(std::max(runs, 1)));
}

} // namespace

Trajectory simulate(const Mdp& mdp, const Policy& policy, std::uint64_t seed, int max_steps,
                    const std::set<int>& hazards) {
    if (max_steps < 1) throw std::invalid_argument("simulate: max_steps must be >= 1");
    if (static_cast<int>(policy.size()) != mdp.num_states)
        throw std::invalid_argument("simulate: policy not total");

    std::mt19937_64 rng(seed);
    Trajectory out;
    out.discounted_constraint_cost.assign(mdp.num_constraints(), 0.0);
    int state = sample_state(rng, mdp.initial_distribution);
    out.initial_state = state;

    double discount_power = 1.0;
    for (int t = 0; t < max_steps; ++t) {
        int action = policy[state];
        if (absorbing_zero_cost(mdp, state, action)) {
            out.reached_absorbing = true;
            break;
        }
        TrajectoryStep step;
        step.state = state;
        step.action = action;
        step.cost = mdp.cost[state][action];
        for (const auto& table : mdp.constraint_costs)
            step.constraint_cost.push_back(table[state][action]);
        out.discounted_cost += discount_power * step.cost;
        for (std::size_t i = 0; i < step.constraint_cost.size(); ++i)
            out.discounted_constraint_cost[i] += discount_power * step.constraint_cost[i];
        discount_power *= mdp.discount;

        state = sample_successor(rng, mdp.transition[state][action]);
        step.collision = hazards.count(state) > 0;
        out.collided = out.collided || step.collision;
        out.steps.push_back(std::move(step));
        if (absorbing_zero_cost(mdp, state, policy[state])) {
            out.reached_absorbing = true;
            break;
        }
    }
    return out;
}

EvaluationReport monte_carlo_report(const GridConfig& grid, const Policy& policy, int runs,
                                    double perturb_prob, std::uint64_t seed, int max_steps,
                                    double discount, const EvaluationContext& context) {
    if (runs < 1) throw std::invalid_argument("monte_carlo_report: runs must be >= 1");
    validate_grid(grid);

    struct RunRecord {
        bool collided = false;
        bool truncated = false;
        double cost = 0.0;
        std::vector<double> constraint_cost;
    };
    std::vector<RunRecord> records(runs);

    auto run_one = [&](int r) {
        GridConfig perturbed =
            perturb_obstacles(grid, perturb_prob, derive_seed(seed, r, 0x0b5));
        Mdp mdp = build_gridworld(perturbed, discount);
        std::set<int> hazards;
        for (const Cell& c : perturbed.obstacles) hazards.insert(perturbed.cell_index(c));
        Trajectory trajectory =
            simulate(mdp, policy, derive_seed(seed, r, 0x51e), max_steps, hazards);
        RunRecord record;
        record.collided = trajectory.collided;
        record.truncated = !trajectory.reached_absorbing;
        record.cost = trajectory.discounted_cost;
        record.constraint_cost = trajectory.discounted_constraint_cost;
        records[r] = std::move(record);
    };

    unsigned workers = worker_count(runs);
    if (workers <= 1) {
        for (int r = 0; r < runs; ++r) run_one(r);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (runs + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            int first = static_cast<int>(w * chunk);
            int last = std::min(runs, static_cast<int>((w + 1) * chunk));
            if (first >= last) break;
            pool.emplace_back([&, first, last] {
                for (int r = first; r < last; ++r) run_one(r);
            });
        }
        for (auto& t : pool) t.join();
    }

    EvaluationReport report;
    report.runs = runs;
    report.perturb_prob = perturb_prob;
    report.seed = seed;
    report.grid_width = grid.width;
    report.grid_height = grid.height;
    report.uncertain_obstacles = static_cast<int>(grid.uncertain_obstacles.size());
    report.context = context;

    int failures = 0;
    std::vector<double> costs;
    costs.reserve(runs);
    int nc = records.empty() ? 0 : static_cast<int>(records[0].constraint_cost.size());
    std::vector<std::vector<double>> constraint_costs(nc);
    for (const auto& record : records) {
        if (record.collided) ++failures;
        if (record.truncated) ++report.truncated_runs;
        costs.push_back(record.cost);
        for (int i = 0; i < nc; ++i) constraint_costs[i].push_back(record.constraint_cost[i]);
    }
    report.failure_rate = static_cast<double>(failures) / runs;
    report.per_run_cost = costs;
    report.objective = summarize(std::move(costs));
    for (int i = 0; i < nc; ++i)
        report.constraints.push_back(summarize(std::move(constraint_costs[i])));
    return report;
}

using nlohmann::json;

namespace {

json summary_json(const CostSummary& summary) {
    return {{"mean", round12(summary.mean)},
            {"min", round12(summary.min)},
            {"max", round12(summary.max)},
            {"p50", round12(summary.p50)},
            {"p90", round12(summary.p90)}};
}

} // namespace

std::string write_report_json(const EvaluationReport& report, const std::string& manifest_hash) {
    json doc;
    doc["runs"] = report.runs;
    doc["perturb_prob"] = round12(report.perturb_prob);
    doc["seed"] = report.seed;
    doc["grid"] = {{"width", report.grid_width},
                   {"height", report.grid_height},
                   {"uncertain_obstacles", report.uncertain_obstacles}};
    doc["failure_rate"] = round12(report.failure_rate);
    doc["truncated_runs"] = report.truncated_runs;
    doc["objective"] = summary_json(report.objective);
    json constraints = json::array();
    for (const auto& summary : report.constraints) constraints.push_back(summary_json(summary));
    doc["constraints"] = std::move(constraints);
    doc["context"] = {{"measure", report.context.measure},
                      {"epsilon", round12(report.context.epsilon)},
                      {"beta", report.context.beta},
                      {"lower_bound", round12(report.context.lower_bound)},
                      {"solve_seconds", round12(report.context.solve_seconds)}};
    if (!manifest_hash.empty()) doc["manifest_hash"] = manifest_hash;
    return doc.dump(2);
}

std::string report_csv_header() {
    return "measure,grid,value_or_bound,solve_time_s,uncertain_obstacles,failure_rate";
}

std::string report_csv_line(const EvaluationReport& report) {
    std::ostringstream out;
    out << report.context.measure << "," << report.grid_width << "x" << report.grid_height
        << "," << format12(report.context.lower_bound) << ","
        << format12(report.context.solve_seconds) << "," << report.uncertain_obstacles << ","
        << format12(report.failure_rate);
    return out.str();
}

} // namespace riskmdp
