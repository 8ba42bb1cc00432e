#pragma once

#include "riskmdp/linprog.hpp"
#include "riskmdp/mdp.hpp"
#include "riskmdp/risk.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace riskmdp {

/// One Bellman-inequality constraint f1(V) - g1(lambda[, zeta]) - g2(V[, zeta]) <= 0
/// for a single (state, action) pair.
struct DcpConstraint {
    int state = 0;
    int action = 0;
    double cost = 0.0;                 // c(s, a)
    std::vector<double> d_costs;       // d^i(s, a)
    DiscreteDistribution next;         // p(. | s, a)
};

/// The difference-of-convex program behind the risk-averse Bellman
/// optimization: minimize <lambda, beta> - <kappa0, V> subject to one
/// constraint per (state, action). For EVaR the program lives in the
/// scaled variables (V~, lambda~, zeta) with g1 = zeta c + <lambda~, d>;
/// for CVaR a single scalar zeta is shared across all constraints.
struct DcpProgram {
    RiskMeasure measure;
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> kappa0;
    std::vector<double> beta;
    double gamma = 0.95;
    std::vector<DcpConstraint> constraints;

    int num_budgets() const { return static_cast<int>(beta.size()); }
    bool has_zeta() const { return measure.kind != RiskKind::Expectation; }

    // variable layout of the linearized subproblems: V, lambda, [zeta], slacks
    int v_index(int s) const { return s; }
    int lambda_index(int i) const { return num_states + i; }
    int zeta_index() const { return num_states + num_budgets(); }
    int slack_index(int k) const {
        return num_states + num_budgets() + (has_zeta() ? 1 : 0) + k;
    }
    int num_decision_vars() const {
        return num_states + num_budgets() + (has_zeta() ? 1 : 0);
    }

    double g1(const DcpConstraint& c, const std::vector<double>& lambda, double zeta) const;
    double g2(const DcpConstraint& c, const std::vector<double>& v, double zeta) const;
    /// Program-space residual f1 - g1 - g2 at a candidate point.
    double residual(const DcpConstraint& c, const std::vector<double>& v,
                    const std::vector<double>& lambda, double zeta) const;
    double max_residual(const std::vector<double>& v, const std::vector<double>& lambda,
                        double zeta) const;

    /// Structural invariants plus random midpoint convexity probes of g2.
    /// Throws std::invalid_argument on violation.
    void validate() const;
};

struct G2Tangent {
    double value = 0.0;
    std::vector<double> dv; // aligned with constraint.next.support
    double dzeta = 0.0;
};

/// First-order lower bound of g2 at the iterate (valid by convexity).
G2Tangent g2_tangent(const DcpProgram& program, const DcpConstraint& c,
                     const std::vector<double>& v, double zeta);

struct CcpIterate {
    int iteration = 0;
    double tau = 0.0;
    double penalized_objective_before = 0.0; // at this tau, previous iterate
    double penalized_objective = 0.0;        // at this tau, accepted iterate
    double max_true_residual = 0.0;          // program-space nonlinear residual
    double certified_bound = 0.0;            // sigma-exact certified lower bound
    int lp_iterations = 0;
};

struct CcpSettings {
    int max_iterations = 200;
    double objective_tolerance = 1e-6;
    double tau0 = 1.0;
    double mu = 1.5;
    double tau_cap = 1e4;
    std::vector<double> init_v;      // empty: zeros
    std::vector<double> init_lambda; // empty: zeros
    double init_zeta = 1.0;
};

enum class CcpStatus { Converged, MaxIterations, NoFeasiblePoint, Unbounded };

std::string to_string(CcpStatus status);

struct CcpSolution {
    CcpStatus status = CcpStatus::NoFeasiblePoint;
    // final accepted iterate in program space (tilde variables for EVaR)
    std::vector<double> v;
    std::vector<double> lambda;
    std::optional<double> zeta;
    double objective = 0.0;     // <lambda, beta> - <kappa0, V>
    double max_residual = 0.0;  // program-space residual of the final iterate
    bool feasible = false;      // max_residual <= 1e-6

    // best sigma-exact certified point along the trajectory, original space
    // (rescaled by 1/zeta for EVaR, shift-repaired to exact feasibility)
    std::vector<double> certified_v;
    std::vector<double> certified_lambda;
    double certified_bound = 0.0;
    double certified_residual = 0.0; // sigma-exact residual before repair

    std::vector<CcpIterate> trace;
};

/// Penalty linearization of the program at `iterate`: each g2 is replaced by
/// its tangent, a slack with weight tau is attached to every constraint, and
/// the result is an LP over (V, lambda[, zeta], s). With `pin_slacks` the
/// slacks are fixed at zero (used while the iterate chain stays feasible).
/// `trust_radius > 0` boxes the step around the iterate.
lp::Problem linearize_g2(const DcpProgram& program, const std::vector<double>& v,
                         const std::vector<double>& lambda, double zeta, double tau,
                         bool pin_slacks = false, double trust_radius = 0.0);

/// Convex-concave procedure: iterate tangent LPs, accept steps whose true
/// residual does not regress, grow tau otherwise, and track the best
/// sigma-exact certified lower bound seen along the way.
CcpSolution ccp_solve(const DcpProgram& program, const CcpSettings& settings = {});

/// Exact linear program for the conditional-expectation case.
struct ExpectationLpResult {
    lp::Status status = lp::Status::NumericalFailure;
    std::vector<double> v;
    std::vector<double> lambda;
    double objective = 0.0; // <kappa0, V*> - <lambda*, beta>
    int lp_iterations = 0;
};

ExpectationLpResult solve_expectation_lp(const Mdp& mdp, const std::vector<double>& beta);

/// Maps a program-space point to original-space (V, lambda) and repairs it
/// to exact sigma feasibility with a uniform shift of V. The returned bound
/// <kappa0, V> - <lambda, beta> is then a certified lower bound.
struct CertifiedPoint {
    std::vector<double> v;
    std::vector<double> lambda;
    double bound = 0.0;
    double residual_before_repair = 0.0;
};

CertifiedPoint certify_point(const DcpProgram& program, const std::vector<double>& v,
                             const std::vector<double>& lambda, double zeta);

void write_ccp_trace_csv(std::ostream& out, const std::vector<CcpIterate>& trace);

} // namespace riskmdp
