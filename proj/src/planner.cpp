#include "riskmdp/planner.hpp"
#include "riskmdp/numfmt.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace riskmdp {

std::string to_string(PlanStatus status) {
    switch (status) {
        case PlanStatus::Certified: return "certified";
        case PlanStatus::NotCertified: return "not_certified";
        case PlanStatus::ProblemInfeasible: return "problem_infeasible";
    }
    return "?";
}

namespace {

void check_config(const Mdp& mdp, const PlannerConfig& config) {
    auto report = validate_mdp(mdp);
    if (!report.ok())
        throw std::invalid_argument("plan: invalid MDP\n" + report.summary());
    if (static_cast<int>(config.budgets.size()) != mdp.num_constraints())
        throw std::invalid_argument("plan: budget arity mismatch");
    for (double b : config.budgets)
        if (!(b > 0.0)) throw std::invalid_argument("plan: budgets must be positive");
    if (config.risk.kind != RiskKind::Expectation &&
        !(config.risk.epsilon > 0.0 && config.risk.epsilon <= 1.0))
        throw std::invalid_argument("plan: epsilon outside (0,1]");
}

std::vector<std::vector<double>> combined_costs(const Mdp& mdp,
                                                const std::vector<double>& lambda) {
    std::vector<std::vector<double>> combined = mdp.cost;
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            for (std::size_t i = 0; i < lambda.size(); ++i)
                combined[s][a] += lambda[i] * mdp.constraint_costs[i][s][a];
    return combined;
}

// Shared fixed-point engine for greedy and fixed-policy evaluation.
// Throws when the contraction iteration budget runs out.
std::vector<double> fixed_point(const Mdp& mdp,
                                const std::vector<std::vector<double>>& costs,
                                const Policy* policy, const RiskMeasure& risk, double tol,
                                const std::vector<double>* warm_start) {
    if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be positive");
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const double gamma = mdp.discount;

    std::vector<double> v =
        warm_start && !warm_start->empty() ? *warm_start : std::vector<double>(S, 0.0);
    std::vector<double> hints(static_cast<std::size_t>(S) * A, 0.0);

    double cmax = 0.0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) cmax = std::max(cmax, costs[s][a]);
    double v0 = 0.0;
    for (double x : v) v0 = std::max(v0, std::fabs(x));
    const double initial_error = v0 + cmax / (1.0 - gamma) + tol;
    const double stop = tol * (1.0 - gamma) / gamma;
    long budget =
        static_cast<long>(std::ceil(std::log(stop / initial_error) / std::log(gamma))) + 32;

    // Gauss-Seidel sweeps; the sup-norm stopping rule stays valid since the
    // in-place update contracts at least as fast as the Jacobi sweep. The
    // floating-point floor keeps huge-magnitude fixed points (large lambda)
    // from spinning on rounding noise below representable progress.
    for (long sweep = 0; sweep < budget; ++sweep) {
        double delta = 0.0;
        double scale = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = lp::kInf;
            int a_lo = policy ? (*policy)[s] : 0;
            int a_hi = policy ? (*policy)[s] + 1 : A;
            for (int a = a_lo; a < a_hi; ++a) {
                std::size_t key = static_cast<std::size_t>(s) * A + a;
                SigmaResult r = sigma_over_states(risk, v, mdp.transition[s][a], hints[key]);
                if (r.zeta_star) hints[key] = *r.zeta_star;
                best = std::min(best, costs[s][a] + gamma * r.value);
            }
            delta = std::max(delta, std::fabs(best - v[s]));
            scale = std::max(scale, std::fabs(best));
            v[s] = best;
        }
        if (delta <= stop + 1e-12 * scale) return v;
    }
    throw std::runtime_error("risk value iteration failed to contract within its budget");
}

} // namespace

DcpProgram assemble_program(const Mdp& mdp, const PlannerConfig& config) {
    check_config(mdp, config);
    DcpProgram program;
    program.measure = config.risk;
    program.num_states = mdp.num_states;
    program.num_actions = mdp.num_actions;
    program.kappa0 = mdp.initial_distribution;
    program.beta = config.budgets;
    program.gamma = mdp.discount;
    program.constraints.reserve(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            DcpConstraint c;
            c.state = s;
            c.action = a;
            c.cost = mdp.cost[s][a];
            c.d_costs.resize(mdp.num_constraints());
            for (int i = 0; i < mdp.num_constraints(); ++i)
                c.d_costs[i] = mdp.constraint_costs[i][s][a];
            c.next = successor_distribution(mdp, s, a);
            program.constraints.push_back(std::move(c));
        }
    }
    program.validate();
    return program;
}

Policy extract_policy(const Mdp& mdp, const std::vector<double>& v,
                      const std::vector<double>& lambda, const RiskMeasure& risk) {
    Policy policy(mdp.num_states, 0);
    auto costs = combined_costs(mdp, lambda);
    for (int s = 0; s < mdp.num_states; ++s) {
        double best = lp::kInf;
        for (int a = 0; a < mdp.num_actions; ++a) {
            double q = costs[s][a] +
                       mdp.discount * sigma_over_states(risk, v, mdp.transition[s][a]).value;
            if (q < best) {
                best = q;
                policy[s] = a;
            }
        }
    }
    return policy;
}

std::vector<double> risk_value_iteration(const Mdp& mdp, const std::vector<double>& lambda,
                                         const RiskMeasure& risk, double tol,
                                         const std::vector<double>* warm_start) {
    return fixed_point(mdp, combined_costs(mdp, lambda), nullptr, risk, tol, warm_start);
}

std::vector<double> policy_risk_values(const Mdp& mdp, const Policy& policy,
                                       const std::vector<std::vector<double>>& costs,
                                       const RiskMeasure& risk, double tol) {
    if (static_cast<int>(policy.size()) != mdp.num_states)
        throw std::invalid_argument("policy_risk_values: policy not total");
    return fixed_point(mdp, costs, &policy, risk, tol, nullptr);
}

double policy_risk_evaluation(const Mdp& mdp, const Policy& policy,
                              const std::vector<std::vector<double>>& costs,
                              const RiskMeasure& risk, double tol) {
    std::vector<double> v = policy_risk_values(mdp, policy, costs, risk, tol);
    double out = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) out += mdp.initial_distribution[s] * v[s];
    return out;
}

OracleResult brute_force_constrained_optimum(const Mdp& mdp, const PlannerConfig& config) {
    check_config(mdp, config);
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    if (std::pow(static_cast<double>(A), static_cast<double>(S)) > 1e6 + 0.5)
        throw std::invalid_argument("brute force: |Act|^|S| exceeds 1e6");

    OracleResult out;
    Policy policy(S, 0);
    const int nc = mdp.num_constraints();
    while (true) {
        ++out.policies_scanned;
        bool feasible = true;
        for (int i = 0; i < nc && feasible; ++i) {
            double d = policy_risk_evaluation(mdp, policy, mdp.constraint_costs[i], config.risk);
            if (d > config.budgets[i] + 1e-9) feasible = false;
        }
        if (feasible) {
            double j = policy_risk_evaluation(mdp, policy, mdp.cost, config.risk);
            if (!out.feasible || j < out.value) {
                out.feasible = true;
                out.value = j;
                out.policy = policy;
            }
        }
        // lexicographic odometer, last state fastest
        int s = S - 1;
        while (s >= 0) {
            if (++policy[s] < A) break;
            policy[s] = 0;
            --s;
        }
        if (s < 0) break;
    }
    return out;
}

namespace {

double kappa_dot(const Mdp& mdp, const std::vector<double>& v) {
    double out = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) out += mdp.initial_distribution[s] * v[s];
    return out;
}

struct Candidate {
    std::vector<double> lambda;
    std::vector<double> v;
    double bound = -lp::kInf;
};

// Exact-feasibility polish: the fixed point at lambda is the pointwise
// largest V satisfying the sigma-exact Bellman inequalities, so its bound
// dominates any certified point with the same multiplier.
Candidate polish(const Mdp& mdp, const PlannerConfig& config, const std::vector<double>& lambda,
                 const std::vector<double>* warm) {
    Candidate c;
    c.lambda = lambda;
    for (double& x : c.lambda) x = std::max(x, 0.0);
    c.v = risk_value_iteration(mdp, c.lambda, config.risk, 1e-8, warm);
    c.bound = kappa_dot(mdp, c.v);
    for (std::size_t i = 0; i < c.lambda.size(); ++i) c.bound -= c.lambda[i] * config.budgets[i];
    return c;
}

void consider(Candidate& best, Candidate&& other) {
    if (other.bound > best.bound) best = std::move(other);
}

} // namespace

PlanResult plan(const Mdp& mdp, const PlannerConfig& config) {
    check_config(mdp, config);
    auto t0 = std::chrono::steady_clock::now();

    PlanResult result;
    result.risk = config.risk;
    result.budgets = config.budgets;
    result.gamma = mdp.discount;

    ExpectationLpResult exp_lp = solve_expectation_lp(mdp, config.budgets);
    if (exp_lp.status == lp::Status::Unbounded) {
        // an improving lambda ray: no policy satisfies the budgets even in
        // expectation, so the Lagrangian supremum is +infinity
        result.status = PlanStatus::ProblemInfeasible;
        result.solver_status = CcpStatus::Unbounded;
        result.solve_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }
    if (exp_lp.status != lp::Status::Optimal)
        throw std::runtime_error("plan: expectation LP failed: " + lp::to_string(exp_lp.status));

    if (config.risk.kind == RiskKind::Expectation) {
        Candidate best = polish(mdp, config, exp_lp.lambda, &exp_lp.v);
        result.status = PlanStatus::Certified;
        result.solver_status = CcpStatus::Converged;
        result.certified = true;
        result.certified_residual = 0.0;
        result.v_star = best.v;
        result.lambda_star = best.lambda;
        result.lower_bound = best.bound;
    } else {
        DcpProgram program = assemble_program(mdp, config);
        CcpSettings settings = config.solver;
        const bool evar = config.risk.kind == RiskKind::EVaR;
        // caller-provided starts are original-space; scale into the
        // program's tilde variables for EVaR
        const std::vector<double> init_v =
            settings.init_v.empty() ? exp_lp.v : settings.init_v;
        const std::vector<double> init_lambda =
            settings.init_lambda.empty() ? exp_lp.lambda : settings.init_lambda;
        settings.init_v = init_v;
        settings.init_lambda = init_lambda;
        if (evar) {
            for (double& x : settings.init_v) x *= settings.init_zeta;
            for (double& x : settings.init_lambda) x *= settings.init_zeta;
        }

        CcpSolution ccp = ccp_solve(program, settings);

        Candidate best = polish(mdp, config, ccp.certified_lambda, &ccp.certified_v);
        consider(best, polish(mdp, config, exp_lp.lambda, &best.v));
        if (init_lambda != exp_lp.lambda)
            consider(best, polish(mdp, config, init_lambda, &best.v));
        {
            std::vector<double> lam = ccp.lambda;
            if (evar && ccp.zeta)
                for (double& x : lam) x /= std::max(*ccp.zeta, 1e-12);
            consider(best, polish(mdp, config, lam, &best.v));
        }

        // local refinement of the multiplier, coordinate-wise; only strict
        // improvements are kept so non-unimodality cannot hurt soundness
        const int passes = mdp.num_states > 150 ? 1 : 3;
        for (std::size_t i = 0; i < best.lambda.size(); ++i) {
            double center = best.lambda[i];
            double width = std::max(1.0, center);
            for (int pass = 0; pass < passes; ++pass) {
                bool improved = false;
                for (double factor : {-1.0, -0.5, 0.5, 1.0}) {
                    std::vector<double> lam = best.lambda;
                    lam[i] = std::max(0.0, center + factor * width);
                    if (lam[i] == best.lambda[i]) continue;
                    Candidate cand = polish(mdp, config, lam, &best.v);
                    if (cand.bound > best.bound + 1e-12) {
                        best = std::move(cand);
                        improved = true;
                    }
                }
                center = best.lambda[i];
                width /= 4.0;
                if (!improved && pass > 0) break;
            }
        }

        result.status = ccp.status == CcpStatus::NoFeasiblePoint ? PlanStatus::NotCertified
                                                                 : PlanStatus::Certified;
        result.solver_status = ccp.status;
        // the reported bound comes from the exact fixed point at lambda*,
        // which satisfies the sigma-exact inequalities by construction;
        // certified_residual records how far the raw solver iterate was
        result.certified = true;
        result.certified_residual = ccp.certified_residual;
        result.v_star = best.v;
        result.lambda_star = best.lambda;
        result.lower_bound = best.bound;
        result.zeta_star = ccp.zeta;
        if (evar && ccp.zeta) {
            result.v_tilde = best.v;
            for (double& x : result.v_tilde) x *= *ccp.zeta;
        }
        result.trace = ccp.trace;
        result.ccp_iterations = static_cast<int>(ccp.trace.size());
    }

    result.policy = extract_policy(mdp, result.v_star, result.lambda_star, config.risk);
    for (int i = 0; i < mdp.num_constraints(); ++i) {
        BudgetCheck check;
        check.cost_index = i;
        check.value =
            policy_risk_evaluation(mdp, result.policy, mdp.constraint_costs[i], config.risk);
        check.limit = config.budgets[i];
        check.satisfied = check.value <= check.limit + 1e-6;
        result.budget_report.push_back(check);
    }
    result.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

using nlohmann::json;

namespace {

json round_array(const std::vector<double>& values) {
    json arr = json::array();
    for (double v : values) arr.push_back(round12(v));
    return arr;
}

} // namespace

std::string write_plan_json(const PlanResult& plan, const std::string& manifest_hash) {
    json doc;
    doc["status"] = to_string(plan.status);
    doc["measure"] = to_string(plan.risk.kind);
    doc["epsilon"] = round12(plan.risk.epsilon);
    doc["beta"] = round_array(plan.budgets);
    doc["gamma"] = round12(plan.gamma);
    doc["v_star"] = round_array(plan.v_star);
    if (!plan.v_tilde.empty()) doc["v_tilde"] = round_array(plan.v_tilde);
    doc["lambda_star"] = round_array(plan.lambda_star);
    if (plan.zeta_star) doc["zeta_star"] = round12(*plan.zeta_star);
    doc["lower_bound"] = round12(plan.lower_bound);
    doc["policy"] = plan.policy;
    json diag;
    diag["solver_status"] = to_string(plan.solver_status);
    diag["certified"] = plan.certified;
    diag["certified_residual"] = round12(plan.certified_residual);
    diag["solve_seconds"] = round12(plan.solve_seconds);
    diag["ccp_iterations"] = plan.ccp_iterations;
    json budget = json::array();
    for (const auto& check : plan.budget_report)
        budget.push_back({{"cost_index", check.cost_index},
                          {"value", round12(check.value)},
                          {"limit", round12(check.limit)},
                          {"satisfied", check.satisfied}});
    diag["budget_report"] = std::move(budget);
    json trace = json::array();
    for (const auto& record : plan.trace)
        trace.push_back({{"iteration", record.iteration},
                         {"tau", round12(record.tau)},
                         {"penalized_objective", round12(record.penalized_objective)},
                         {"max_true_residual", round12(record.max_true_residual)},
                         {"certified_bound", round12(record.certified_bound)}});
    diag["trace"] = std::move(trace);
    doc["diagnostics"] = std::move(diag);
    if (!manifest_hash.empty()) doc["manifest_hash"] = manifest_hash;
    return doc.dump(2);
}

PlanResult read_plan_json(const std::string& text) {
    json doc = json::parse(text);
    PlanResult plan;
    std::string status = doc.at("status").get<std::string>();
    if (status == "certified") plan.status = PlanStatus::Certified;
    else if (status == "not_certified") plan.status = PlanStatus::NotCertified;
    else plan.status = PlanStatus::ProblemInfeasible;
    plan.risk.kind = risk_kind_from_string(doc.at("measure").get<std::string>());
    plan.risk.epsilon = doc.at("epsilon").get<double>();
    plan.budgets = doc.at("beta").get<std::vector<double>>();
    plan.gamma = doc.at("gamma").get<double>();
    plan.v_star = doc.at("v_star").get<std::vector<double>>();
    if (doc.contains("v_tilde")) plan.v_tilde = doc.at("v_tilde").get<std::vector<double>>();
    plan.lambda_star = doc.at("lambda_star").get<std::vector<double>>();
    if (doc.contains("zeta_star")) plan.zeta_star = doc.at("zeta_star").get<double>();
    plan.lower_bound = doc.at("lower_bound").get<double>();
    plan.policy = doc.at("policy").get<Policy>();
    if (doc.contains("diagnostics")) {
        const json& diag = doc.at("diagnostics");
        plan.certified = diag.value("certified", false);
        plan.certified_residual = diag.value("certified_residual", 0.0);
        plan.solve_seconds = diag.value("solve_seconds", 0.0);
        plan.ccp_iterations = diag.value("ccp_iterations", 0);
        if (diag.contains("budget_report"))
            for (const auto& item : diag.at("budget_report")) {
                BudgetCheck check;
                check.cost_index = item.at("cost_index").get<int>();
                check.value = item.at("value").get<double>();
                check.limit = item.at("limit").get<double>();
                check.satisfied = item.at("satisfied").get<bool>();
                plan.budget_report.push_back(check);
            }
    }
    return plan;
}

void write_plan_file(const PlanResult& plan, const std::string& path,
                     const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << write_plan_json(plan, manifest_hash) << "\n";
}

PlanResult read_plan_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return read_plan_json(buffer.str());
}

} // namespace riskmdp
