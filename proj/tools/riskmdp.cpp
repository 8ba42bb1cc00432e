// riskmdp: synthesize and evaluate risk-averse policies for finite MDPs.
//
// Subcommands: gen-grid, plan, evaluate, render, oracle. Every command
// writes a manifest next to its outputs; output files carry the manifest
// hash so results stay traceable to their inputs.
//
// Exit codes: 0 success, 2 argument error, 3 solver failure, 4 infeasible.

#include "riskmdp/dcp.hpp"
#include "riskmdp/evaluate.hpp"
#include "riskmdp/gridworld.hpp"
#include "riskmdp/mdp.hpp"
#include "riskmdp/numfmt.hpp"
#include "riskmdp/planner.hpp"
#include "riskmdp/render.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;
using namespace riskmdp;

constexpr int kExitOk = 0;
constexpr int kExitArgs = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInfeasible = 4;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hash_hex(const std::string& text) {
    char buffer[20];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text)));
    return buffer;
}

/// Serializes the manifest, stamps its own hash, writes it next to the
/// outputs, and returns the hash for embedding in the output files.
std::string write_manifest(json manifest, const std::string& path) {
    manifest.erase("manifest_hash");
    std::string hash = hash_hex(manifest.dump());
    manifest["manifest_hash"] = hash;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << manifest.dump(2) << "\n";
    return hash;
}

bool parse_size(const std::string& text, int& width, int& height) {
    auto x = text.find('x');
    if (x == std::string::npos) return false;
    try {
        width = std::stoi(text.substr(0, x));
        height = std::stoi(text.substr(x + 1));
    } catch (...) {
        return false;
    }
    return width > 0 && height > 0;
}

int default_uncertain(int width, int height) {
    // the three published instance families carry 3, 6 and 9 uncertain cells
    int cells = width * height;
    if (cells <= 100) return 3;
    if (cells <= 225) return 6;
    return 9;
}

struct PlanArgs {
    std::string grid_path;
    std::string mdp_path;
    std::string measure = "expectation";
    double epsilon = 0.15;
    std::vector<double> beta;
    double gamma = 0.95;
    std::string warm_start_path;
    int max_iterations = 200;
    std::string out = "plan.json";
};

int cmd_gen_grid(const std::string& size, double obstacle_frac, int uncertain,
                 std::uint64_t seed, const std::string& goal, double slip_cardinal,
                 double slip_diagonal, const std::string& out) {
    int width = 0, height = 0;
    if (!parse_size(size, width, height)) {
        std::cerr << "invalid --size, expected MxN\n";
        return kExitArgs;
    }
    if (uncertain < 0) uncertain = default_uncertain(width, height);
    GridConfig grid = generate_grid(width, height, obstacle_frac, uncertain, seed);
    grid.slip = {slip_cardinal, slip_diagonal};
    if (!goal.empty()) {
        auto comma = goal.find(',');
        if (comma == std::string::npos) {
            std::cerr << "invalid --goal, expected X,Y\n";
            return kExitArgs;
        }
        Cell cell{};
        try {
            cell.x = std::stoi(goal.substr(0, comma));
            cell.y = std::stoi(goal.substr(comma + 1));
        } catch (...) {
            std::cerr << "invalid --goal, expected X,Y\n";
            return kExitArgs;
        }
        if (!grid.in_grid(cell)) {
            std::cerr << "goal out of range\n";
            return kExitArgs;
        }
        grid.goal = cell;
        grid.obstacles.erase(cell);
        std::set<Cell> uncertain_kept;
        for (const Cell& c : grid.uncertain_obstacles)
            if (grid.obstacles.count(c)) uncertain_kept.insert(c);
        grid.uncertain_obstacles = uncertain_kept;
    }
    json manifest = {{"command", "gen-grid"},
                     {"size", size},
                     {"obstacle_frac", obstacle_frac},
                     {"uncertain", uncertain},
                     {"seed", seed},
                     {"goal", goal},
                     {"slip", {slip_cardinal, slip_diagonal}},
                     {"out", out}};
    write_manifest(manifest, out + ".manifest.json");
    write_grid_file(grid, out);
    std::cout << "wrote " << out << " (" << width << "x" << height << ", "
              << grid.obstacles.size() << " obstacles, " << grid.uncertain_obstacles.size()
              << " uncertain)\n";
    return kExitOk;
}

int cmd_plan(const PlanArgs& args) {
    Mdp mdp;
    if (!args.mdp_path.empty()) {
        mdp = read_mdp_file(args.mdp_path);
    } else if (!args.grid_path.empty()) {
        mdp = build_gridworld(read_grid_file(args.grid_path), args.gamma);
    } else {
        std::cerr << "plan: need --grid or --mdp\n";
        return kExitArgs;
    }

    PlannerConfig config;
    config.risk.kind = risk_kind_from_string(args.measure);
    config.risk.epsilon = config.risk.kind == RiskKind::Expectation ? 1.0 : args.epsilon;
    config.budgets = args.beta;
    if (config.budgets.empty()) {
        std::cerr << "plan: need at least one --beta\n";
        return kExitArgs;
    }
    config.solver.max_iterations = args.max_iterations;
    if (!args.warm_start_path.empty()) {
        PlanResult warm = read_plan_file(args.warm_start_path);
        config.solver.init_v = warm.v_star;
        config.solver.init_lambda = warm.lambda_star;
    }

    PlanResult result = plan(mdp, config);

    json manifest = {{"command", "plan"},
                     {"grid", args.grid_path},
                     {"mdp", args.mdp_path},
                     {"measure", args.measure},
                     {"epsilon", args.epsilon},
                     {"beta", args.beta},
                     {"gamma", args.gamma},
                     {"warm_start", args.warm_start_path},
                     {"out", args.out},
                     {"solve_seconds", round12(result.solve_seconds)}};
    std::string hash = write_manifest(manifest, args.out + ".manifest.json");
    write_plan_file(result, args.out, hash);

    if (result.status == PlanStatus::ProblemInfeasible) {
        std::cerr << "no policy satisfies the budgets: the multiplier direction is unbounded\n";
        return kExitInfeasible;
    }
    std::cout << "lower bound " << format12(result.lower_bound) << " in "
              << format12(result.solve_seconds) << " s"
              << (result.solver_status == CcpStatus::Converged ? ""
                                                               : " (solver stopped early)")
              << "\n";
    if (result.status == PlanStatus::NotCertified) {
        std::cerr << "solver found no feasible point; see the trace in " << args.out << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

int cmd_evaluate(const std::string& grid_path, const std::string& plan_path, int runs,
                 double perturb, std::uint64_t seed, int max_steps, const std::string& out) {
    GridConfig grid = read_grid_file(grid_path);
    PlanResult result = read_plan_file(plan_path);
    EvaluationContext context;
    context.measure = to_string(result.risk.kind);
    context.epsilon = result.risk.epsilon;
    context.beta = result.budgets;
    context.lower_bound = result.lower_bound;
    context.solve_seconds = result.solve_seconds;

    EvaluationReport report = monte_carlo_report(grid, result.policy, runs, perturb, seed,
                                                 max_steps, result.gamma, context);
    json manifest = {{"command", "evaluate"}, {"grid", grid_path}, {"plan", plan_path},
                     {"runs", runs},          {"perturb", perturb}, {"seed", seed},
                     {"max_steps", max_steps}, {"out", out}};
    std::string hash = write_manifest(manifest, out + ".manifest.json");
    {
        std::ofstream file(out);
        if (!file) throw std::runtime_error("cannot open " + out);
        file << write_report_json(report, hash) << "\n";
    }
    std::string csv_path = out.substr(0, out.find_last_of('.')) + ".csv";
    {
        std::ofstream file(csv_path);
        file << report_csv_header() << "\n" << report_csv_line(report) << "\n";
    }
    std::cout << "failure rate " << format12(report.failure_rate) << " over " << runs
              << " runs; wrote " << out << " and " << csv_path << "\n";
    return kExitOk;
}

int cmd_render(const std::string& grid_path, const std::string& plan_path,
               const std::string& out) {
    GridConfig grid = read_grid_file(grid_path);
    PlanResult result = read_plan_file(plan_path);
    std::string svg = render_svg(grid, result.v_star, result.policy);
    std::ofstream file(out);
    if (!file) throw std::runtime_error("cannot open " + out);
    file << svg;
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

int cmd_oracle(const PlanArgs& args) {
    Mdp mdp;
    if (!args.mdp_path.empty()) {
        mdp = read_mdp_file(args.mdp_path);
    } else if (!args.grid_path.empty()) {
        mdp = build_gridworld(read_grid_file(args.grid_path), args.gamma);
    } else {
        std::cerr << "oracle: need --grid or --mdp\n";
        return kExitArgs;
    }
    PlannerConfig config;
    config.risk.kind = risk_kind_from_string(args.measure);
    config.risk.epsilon = config.risk.kind == RiskKind::Expectation ? 1.0 : args.epsilon;
    config.budgets = args.beta;
    if (config.budgets.empty()) {
        std::cerr << "oracle: need at least one --beta\n";
        return kExitArgs;
    }

    OracleResult oracle;
    try {
        oracle = brute_force_constrained_optimum(mdp, config);
    } catch (const std::invalid_argument& e) {
        std::cerr << "oracle: " << e.what() << "\n";
        return kExitArgs;
    }
    PlanResult result = plan(mdp, config);

    json doc;
    doc["oracle_feasible"] = oracle.feasible;
    doc["policies_scanned"] = oracle.policies_scanned;
    if (oracle.feasible) {
        doc["oracle_value"] = round12(oracle.value);
        doc["oracle_policy"] = oracle.policy;
    }
    doc["plan_status"] = to_string(result.status);
    if (result.status != PlanStatus::ProblemInfeasible) {
        doc["plan_bound"] = round12(result.lower_bound);
        if (oracle.feasible) doc["gap"] = round12(oracle.value - result.lower_bound);
    }
    json manifest = {{"command", "oracle"},   {"grid", args.grid_path},
                     {"mdp", args.mdp_path},  {"measure", args.measure},
                     {"epsilon", args.epsilon}, {"beta", args.beta},
                     {"gamma", args.gamma},   {"out", args.out}};
    std::string hash = write_manifest(manifest, args.out + ".manifest.json");
    doc["manifest_hash"] = hash;
    std::ofstream file(args.out);
    if (!file) throw std::runtime_error("cannot open " + args.out);
    file << doc.dump(2) << "\n";

    if (!oracle.feasible && result.status == PlanStatus::ProblemInfeasible) {
        std::cout << "both the oracle and the planner report an infeasible problem\n";
        return kExitInfeasible;
    }
    std::cout << "oracle " << (oracle.feasible ? format12(oracle.value) : std::string("infeasible"))
              << ", plan bound "
              << (result.status != PlanStatus::ProblemInfeasible
                      ? format12(result.lower_bound)
                      : std::string("-"))
              << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-averse MDP planning toolkit"};
    app.require_subcommand(1);

    // gen-grid
    std::string size = "10x10", grid_out = "grid.json", grid_goal;
    double obstacle_frac = 0.25, slip_cardinal = 0.2, slip_diagonal = 0.4;
    int uncertain = -1;
    std::uint64_t grid_seed = 2024;
    auto* gen = app.add_subcommand("gen-grid", "generate a rover grid instance");
    gen->add_option("--size", size, "grid size as MxN")->capture_default_str();
    gen->add_option("--obstacle-frac", obstacle_frac, "fraction of cells made obstacles")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
    gen->add_option("--uncertain", uncertain,
                    "number of uncertain single-cell obstacles (default by size: 3/6/9)");
    gen->add_option("--seed", grid_seed, "layout seed")->capture_default_str();
    gen->add_option("--goal", grid_goal, "goal cell as X,Y (default: top-left corner)");
    gen->add_option("--slip-cardinal", slip_cardinal, "slip mass for cardinal moves")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
    gen->add_option("--slip-diagonal", slip_diagonal, "slip mass for diagonal moves")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
    gen->add_option("--out", grid_out, "output path")->capture_default_str();

    // plan
    PlanArgs plan_args;
    auto* plan_cmd = app.add_subcommand("plan", "synthesize a policy with a certified bound");
    plan_cmd->add_option("--grid", plan_args.grid_path, "grid.json input");
    plan_cmd->add_option("--mdp", plan_args.mdp_path, "mdp.json input");
    plan_cmd->add_option("--measure", plan_args.measure, "expectation | cvar | evar")
        ->check(CLI::IsMember({"expectation", "cvar", "evar"}))
        ->capture_default_str();
    plan_cmd->add_option("--epsilon", plan_args.epsilon, "risk confidence level")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    plan_cmd->add_option("--beta", plan_args.beta, "budget per constraint cost (repeatable)");
    plan_cmd->add_option("--gamma", plan_args.gamma, "discount factor")
        ->check(CLI::Range(1e-9, 0.999999))
        ->capture_default_str();
    plan_cmd->add_option("--warm-start", plan_args.warm_start_path,
                         "plan.json whose solution seeds the solver");
    plan_cmd->add_option("--max-iterations", plan_args.max_iterations, "CCP iteration cap")
        ->capture_default_str();
    plan_cmd->add_option("--out", plan_args.out, "output path")->capture_default_str();

    // evaluate
    std::string eval_grid, eval_plan, eval_out = "report.json";
    int runs = 100, max_steps = 400;
    double perturb = 0.2;
    std::uint64_t eval_seed = 7;
    auto* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo robustness evaluation");
    eval_cmd->add_option("--grid", eval_grid, "grid.json input")->required();
    eval_cmd->add_option("--plan", eval_plan, "plan.json input")->required();
    eval_cmd->add_option("--runs", runs, "number of Monte Carlo runs")->capture_default_str();
    eval_cmd->add_option("--perturb", perturb, "obstacle perturbation probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    eval_cmd->add_option("--seed", eval_seed, "simulation seed")->capture_default_str();
    eval_cmd->add_option("--max-steps", max_steps, "episode step cap")->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "output path")->capture_default_str();

    // render
    std::string render_grid, render_plan, render_out = "plan.svg";
    auto* render_cmd = app.add_subcommand("render", "render values and policy to SVG");
    render_cmd->add_option("--grid", render_grid, "grid.json input")->required();
    render_cmd->add_option("--plan", render_plan, "plan.json input")->required();
    render_cmd->add_option("--out", render_out, "output path")->capture_default_str();

    // oracle
    PlanArgs oracle_args;
    oracle_args.out = "oracle.json";
    auto* oracle_cmd =
        app.add_subcommand("oracle", "brute-force audit of the planner bound (small instances)");
    oracle_cmd->add_option("--grid", oracle_args.grid_path, "grid.json input");
    oracle_cmd->add_option("--mdp", oracle_args.mdp_path, "mdp.json input");
    oracle_cmd->add_option("--measure", oracle_args.measure, "expectation | cvar | evar")
        ->check(CLI::IsMember({"expectation", "cvar", "evar"}))
        ->capture_default_str();
    oracle_cmd->add_option("--epsilon", oracle_args.epsilon, "risk confidence level")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    oracle_cmd->add_option("--beta", oracle_args.beta, "budget per constraint cost");
    oracle_cmd->add_option("--gamma", oracle_args.gamma, "discount factor")
        ->capture_default_str();
    oracle_cmd->add_option("--out", oracle_args.out, "output path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitArgs;
    }

    try {
        if (gen->parsed())
            return cmd_gen_grid(size, obstacle_frac, uncertain, grid_seed, grid_goal,
                                slip_cardinal, slip_diagonal, grid_out);
        if (plan_cmd->parsed()) return cmd_plan(plan_args);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_grid, eval_plan, runs, perturb,
                                                    eval_seed, max_steps, eval_out);
        if (render_cmd->parsed()) return cmd_render(render_grid, render_plan, render_out);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgs;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitArgs;
}
