#pragma once

#include "riskmdp/dcp.hpp"
#include "riskmdp/mdp.hpp"
#include "riskmdp/risk.hpp"

#include <optional>
#include <string>
#include <vector>

namespace riskmdp {

/// Deterministic stationary policy: one action per state.
using Policy = std::vector<int>;

struct PlannerConfig {
    RiskMeasure risk;
    std::vector<double> budgets; // beta, strictly positive
    CcpSettings solver;
};

enum class PlanStatus { Certified, NotCertified, ProblemInfeasible };

std::string to_string(PlanStatus status);

/// Budget audit of the extracted policy (reported, never silently enforced).
struct BudgetCheck {
    int cost_index = 0;
    double value = 0.0; // D^i of the extracted policy under the chosen measure
    double limit = 0.0; // beta^i
    bool satisfied = false;
};

struct PlanResult {
    PlanStatus status = PlanStatus::NotCertified;
    RiskMeasure risk;
    std::vector<double> budgets;
    double gamma = 0.95;

    std::vector<double> v_star;          // original-space values
    std::vector<double> v_tilde;         // EVaR only: scaled values zeta * V
    std::vector<double> lambda_star;     // original-space multipliers
    std::optional<double> zeta_star;
    double lower_bound = 0.0;            // <kappa0, V*> - <lambda*, beta>
    Policy policy;

    // diagnostics
    CcpStatus solver_status = CcpStatus::Converged;
    bool certified = false;              // sigma-exact residual <= 1e-6 pre-repair
    double certified_residual = 0.0;
    double solve_seconds = 0.0;
    int ccp_iterations = 0;
    std::vector<BudgetCheck> budget_report;
    std::vector<CcpIterate> trace;
};

/// Builds the Bellman-inequality DCP for the chosen measure: one constraint
/// per (state, action); a shared scalar zeta for CVaR; scaled variables and
/// g1 = zeta c + <lambda~, d> for EVaR.
DcpProgram assemble_program(const Mdp& mdp, const PlannerConfig& config);

/// Full planning pass. Expectation goes through the exact LP; CVaR and EVaR
/// run the convex-concave procedure warm-started from the expectation
/// solution, then every candidate multiplier (trajectory iterates, the
/// expectation multiplier, and a local golden-section refinement) is polished
/// by exact risk value iteration. Every reported bound comes from a point
/// that satisfies the sigma-exact Bellman inequalities.
PlanResult plan(const Mdp& mdp, const PlannerConfig& config);

/// Greedy policy: argmin over actions of c + <lambda, d> + gamma sigma(V);
/// ties break to the lowest action index.
Policy extract_policy(const Mdp& mdp, const std::vector<double>& v,
                      const std::vector<double>& lambda, const RiskMeasure& risk);

/// Fixed point of V(s) = min_a [c + <lambda, d> + gamma sigma(V, s, p)] to
/// sup-norm tolerance tol. Throws if the contraction iteration count bound
/// is exceeded (which indicates a sigma implementation bug).
std::vector<double> risk_value_iteration(const Mdp& mdp, const std::vector<double>& lambda,
                                         const RiskMeasure& risk, double tol = 1e-8,
                                         const std::vector<double>* warm_start = nullptr);

/// Nested discounted risk of a fixed policy for one cost table; returns
/// <kappa0, V_pi>.
double policy_risk_evaluation(const Mdp& mdp, const Policy& policy,
                              const std::vector<std::vector<double>>& costs,
                              const RiskMeasure& risk, double tol = 1e-8);

/// Per-state values of the same fixed-policy evaluation.
std::vector<double> policy_risk_values(const Mdp& mdp, const Policy& policy,
                                       const std::vector<std::vector<double>>& costs,
                                       const RiskMeasure& risk, double tol = 1e-8);

struct OracleResult {
    bool feasible = false;
    double value = 0.0;
    Policy policy;
    long policies_scanned = 0;
};

/// Enumerates every deterministic stationary policy (guarded to 1e6),
/// evaluates J and all D^i under the configured measure, and returns the
/// cheapest budget-feasible policy. Ties break lexicographically.
OracleResult brute_force_constrained_optimum(const Mdp& mdp, const PlannerConfig& config);

std::string write_plan_json(const PlanResult& plan, const std::string& manifest_hash = "");
PlanResult read_plan_json(const std::string& text);
void write_plan_file(const PlanResult& plan, const std::string& path,
                     const std::string& manifest_hash = "");
PlanResult read_plan_file(const std::string& path);

} // namespace riskmdp
