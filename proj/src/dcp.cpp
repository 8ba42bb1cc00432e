#include "riskmdp/dcp.hpp"
#include "riskmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace riskmdp {

std::string to_string(CcpStatus status) {
    switch (status) {
        case CcpStatus::Converged: return "converged";
        case CcpStatus::MaxIterations: return "max_iterations";
        case CcpStatus::NoFeasiblePoint: return "no_feasible_point";
        case CcpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

double DcpProgram::g1(const DcpConstraint& c, const std::vector<double>& lambda,
                      double zeta) const {
    double out = measure.kind == RiskKind::EVaR ? zeta * c.cost : c.cost;
    for (std::size_t i = 0; i < c.d_costs.size(); ++i) out += lambda[i] * c.d_costs[i];
    return out;
}

double DcpProgram::g2(const DcpConstraint& c, const std::vector<double>& v,
                      double zeta) const {
    switch (measure.kind) {
        case RiskKind::Expectation: {
            double ev = 0.0;
            for (std::size_t k = 0; k < c.next.size(); ++k)
                ev += c.next.probabilities[k] * v[c.next.support[k]];
            return gamma * ev;
        }
        case RiskKind::CVaR: {
            double tail = 0.0;
            for (std::size_t k = 0; k < c.next.size(); ++k)
                tail += c.next.probabilities[k] * std::max(v[c.next.support[k]] - zeta, 0.0);
            return gamma * (zeta + tail / measure.epsilon);
        }
        case RiskKind::EVaR: {
            double vmax = -lp::kInf;
            for (int s : c.next.support) vmax = std::max(vmax, v[s]);
            double total = 0.0;
            for (std::size_t k = 0; k < c.next.size(); ++k)
                total += c.next.probabilities[k] * std::exp(v[c.next.support[k]] - vmax);
            return gamma * (vmax + std::log(total) - std::log(measure.epsilon));
        }
    }
    throw std::invalid_argument("g2: unsupported measure");
}

double DcpProgram::residual(const DcpConstraint& c, const std::vector<double>& v,
                            const std::vector<double>& lambda, double zeta) const {
    return v[c.state] - g1(c, lambda, zeta) - g2(c, v, zeta);
}

double DcpProgram::max_residual(const std::vector<double>& v,
                                const std::vector<double>& lambda, double zeta) const {
    double worst = -lp::kInf;
    for (const auto& c : constraints) worst = std::max(worst, residual(c, v, lambda, zeta));
    return worst;
}

void DcpProgram::validate() const {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("dcp: empty program");
    if (static_cast<int>(kappa0.size()) != num_states)
        throw std::invalid_argument("dcp: kappa0 length mismatch");
    if (static_cast<int>(constraints.size()) != num_states * num_actions)
        throw std::invalid_argument("dcp: expected one constraint per (state, action)");
    std::set<std::pair<int, int>> seen;
    std::set<int> states;
    for (const auto& c : constraints) {
        if (c.state < 0 || c.state >= num_states || c.action < 0 || c.action >= num_actions)
            throw std::invalid_argument("dcp: constraint indices out of range");
        if (!seen.insert({c.state, c.action}).second)
            throw std::invalid_argument("dcp: duplicate (state, action) constraint");
        if (static_cast<int>(c.d_costs.size()) != num_budgets())
            throw std::invalid_argument("dcp: constraint-cost arity mismatch");
        states.insert(c.state);
    }
    if (static_cast<int>(states.size()) != num_states)
        throw std::invalid_argument("dcp: some state has no constraint");

    // midpoint convexity probes of g2 on a sample of constraints
    std::mt19937_64 rng(0xDCD);
    const std::size_t samples = std::min<std::size_t>(constraints.size(), 16);
    for (std::size_t t = 0; t < samples; ++t) {
        const auto& c = constraints[pick_index(rng, constraints.size())];
        for (int probe = 0; probe < 32; ++probe) {
            std::vector<double> a(num_states, 0.0), b(num_states, 0.0), mid(num_states, 0.0);
            for (int s = 0; s < num_states; ++s) {
                a[s] = -10.0 + 20.0 * next_double(rng);
                b[s] = -10.0 + 20.0 * next_double(rng);
                mid[s] = 0.5 * (a[s] + b[s]);
            }
            double za = 0.1 + 5.0 * next_double(rng);
            double zb = 0.1 + 5.0 * next_double(rng);
            double g_mid = g2(c, mid, 0.5 * (za + zb));
            double avg = 0.5 * (g2(c, a, za) + g2(c, b, zb));
            if (g_mid > avg + 1e-9)
                throw std::invalid_argument("dcp: g2 failed a convexity probe");
        }
    }
}

G2Tangent g2_tangent(const DcpProgram& program, const DcpConstraint& c,
                     const std::vector<double>& v, double zeta) {
    G2Tangent tangent;
    const auto& next = c.next;
    tangent.dv.assign(next.size(), 0.0);
    const double gamma = program.gamma;
    switch (program.measure.kind) {
        case RiskKind::Expectation: {
            for (std::size_t k = 0; k < next.size(); ++k)
                tangent.dv[k] = gamma * next.probabilities[k];
            tangent.value = 0.0;
            for (std::size_t k = 0; k < next.size(); ++k)
                tangent.value += tangent.dv[k] * v[next.support[k]];
            return tangent;
        }
        case RiskKind::CVaR: {
            const double eps = program.measure.epsilon;
            double tail = 0.0;
            double mass_above = 0.0;
            for (std::size_t k = 0; k < next.size(); ++k) {
                double x = v[next.support[k]] - zeta;
                if (x > 0.0) {
                    tail += next.probabilities[k] * x;
                    mass_above += next.probabilities[k];
                    tangent.dv[k] = gamma * next.probabilities[k] / eps;
                }
            }
            tangent.value = gamma * (zeta + tail / eps);
            tangent.dzeta = gamma * (1.0 - mass_above / eps);
            return tangent;
        }
        case RiskKind::EVaR: {
            double vmax = -lp::kInf;
            for (int s : next.support) vmax = std::max(vmax, v[s]);
            double total = 0.0;
            std::vector<double> w(next.size());
            for (std::size_t k = 0; k < next.size(); ++k) {
                w[k] = next.probabilities[k] * std::exp(v[next.support[k]] - vmax);
                total += w[k];
            }
            for (std::size_t k = 0; k < next.size(); ++k) tangent.dv[k] = gamma * w[k] / total;
            tangent.value =
                gamma * (vmax + std::log(total) - std::log(program.measure.epsilon));
            return tangent;
        }
    }
    throw std::invalid_argument("g2_tangent: unsupported measure");
}

lp::Problem linearize_g2(const DcpProgram& program, const std::vector<double>& v,
                         const std::vector<double>& lambda, double zeta, double tau,
                         bool pin_slacks, double trust_radius) {
    const int S = program.num_states;
    const int nc = program.num_budgets();
    const bool evar = program.measure.kind == RiskKind::EVaR;
    const int m = static_cast<int>(program.constraints.size());

    lp::Problem problem;
    for (int s = 0; s < S; ++s) problem.add_variable(-program.kappa0[s], -lp::kInf, lp::kInf);
    for (int i = 0; i < nc; ++i) problem.add_variable(program.beta[i], 0.0, lp::kInf);
    if (program.has_zeta()) {
        double floor = evar ? 1e-6 : -lp::kInf; // change of variables needs zeta > 0
        problem.add_variable(0.0, floor, lp::kInf);
    }
    for (int k = 0; k < m; ++k)
        problem.add_variable(tau, 0.0, pin_slacks ? 0.0 : lp::kInf);

    for (int k = 0; k < m; ++k) {
        const auto& c = program.constraints[k];
        G2Tangent tangent = g2_tangent(program, c, v, zeta);

        std::vector<int> index;
        std::vector<double> value;
        index.reserve(c.next.size() + nc + 4);
        value.reserve(c.next.size() + nc + 4);

        double self_coef = 1.0;
        double rhs = tangent.value;
        for (std::size_t j = 0; j < c.next.size(); ++j) {
            int s = c.next.support[j];
            rhs -= tangent.dv[j] * v[s];
            if (s == c.state) {
                self_coef -= tangent.dv[j];
            } else {
                index.push_back(program.v_index(s));
                value.push_back(-tangent.dv[j]);
            }
        }
        index.push_back(program.v_index(c.state));
        value.push_back(self_coef);
        for (int i = 0; i < nc; ++i) {
            if (c.d_costs[i] == 0.0) continue;
            index.push_back(program.lambda_index(i));
            value.push_back(-c.d_costs[i]);
        }
        if (program.has_zeta()) {
            double coef = -tangent.dzeta - (evar ? c.cost : 0.0);
            if (coef != 0.0) {
                index.push_back(program.zeta_index());
                value.push_back(coef);
            }
            rhs -= tangent.dzeta * zeta;
        }
        if (!evar) rhs += c.cost;
        index.push_back(program.slack_index(k));
        value.push_back(-1.0);
        problem.add_le_row(std::move(index), std::move(value), rhs);
    }

    if (trust_radius > 0.0) {
        auto box = [&](int var, double center, bool lower_side) {
            if (lower_side)
                problem.add_le_row({var}, {-1.0}, trust_radius - center);
            else
                problem.add_le_row({var}, {1.0}, trust_radius + center);
        };
        for (int s = 0; s < S; ++s) {
            box(program.v_index(s), v[s], true);
            box(program.v_index(s), v[s], false);
        }
        for (int i = 0; i < nc; ++i) box(program.lambda_index(i), lambda[i], false);
        if (program.has_zeta()) {
            box(program.zeta_index(), zeta, true);
            box(program.zeta_index(), zeta, false);
        }
    }
    return problem;
}

CertifiedPoint certify_point(const DcpProgram& program, const std::vector<double>& v,
                             const std::vector<double>& lambda, double zeta) {
    CertifiedPoint point;
    point.v = v;
    point.lambda = lambda;
    if (program.measure.kind == RiskKind::EVaR) {
        double scale = std::max(zeta, 1e-12);
        for (double& x : point.v) x /= scale;
        for (double& x : point.lambda) x /= scale;
    }
    for (double& x : point.lambda) x = std::max(x, 0.0);

    // sigma-exact residuals: the risk transition mapping performs its own
    // inner minimization per constraint, independent of the shared zeta
    double worst = -lp::kInf;
    for (const auto& c : program.constraints) {
        double combined = c.cost;
        for (std::size_t i = 0; i < c.d_costs.size(); ++i)
            combined += point.lambda[i] * c.d_costs[i];
        double risk = sigma_over_states(program.measure, point.v, c.next).value;
        worst = std::max(worst, point.v[c.state] - combined - program.gamma * risk);
    }
    point.residual_before_repair = worst;
    if (worst > 0.0) {
        // translation invariance: shifting V down by r / (1 - gamma) restores
        // feasibility exactly
        double shift = worst / (1.0 - program.gamma);
        for (double& x : point.v) x -= shift;
    }
    point.bound = 0.0;
    for (int s = 0; s < program.num_states; ++s) point.bound += program.kappa0[s] * point.v[s];
    for (int i = 0; i < program.num_budgets(); ++i)
        point.bound -= point.lambda[i] * program.beta[i];
    return point;
}

namespace {

struct IterateState {
    std::vector<double> v;
    std::vector<double> lambda;
    double zeta = 1.0;
};

double raw_objective(const DcpProgram& program, const IterateState& x) {
    double obj = 0.0;
    for (int i = 0; i < program.num_budgets(); ++i) obj += program.beta[i] * x.lambda[i];
    for (int s = 0; s < program.num_states; ++s) obj -= program.kappa0[s] * x.v[s];
    return obj;
}

double merit(const DcpProgram& program, const IterateState& x, double tau) {
    double total = raw_objective(program, x);
    for (const auto& c : program.constraints)
        total += tau * std::max(0.0, program.residual(c, x.v, x.lambda, x.zeta));
    return total;
}

} // namespace

CcpSolution ccp_solve(const DcpProgram& program, const CcpSettings& settings) {
    program.validate();
    const int S = program.num_states;
    const int nc = program.num_budgets();

    IterateState x;
    x.v = settings.init_v.empty() ? std::vector<double>(S, 0.0) : settings.init_v;
    x.lambda = settings.init_lambda.empty() ? std::vector<double>(nc, 0.0) : settings.init_lambda;
    x.zeta = settings.init_zeta;
    if (static_cast<int>(x.v.size()) != S || static_cast<int>(x.lambda.size()) != nc)
        throw std::invalid_argument("ccp_solve: initialization size mismatch");

    CcpSolution out;
    double tau = settings.tau0;

    CertifiedPoint best = certify_point(program, x.v, x.lambda, x.zeta);
    out.certified_v = best.v;
    out.certified_lambda = best.lambda;
    out.certified_bound = best.bound;
    out.certified_residual = best.residual_before_repair;

    double prev_objective = raw_objective(program, x);
    double prev_residual = program.max_residual(x.v, x.lambda, x.zeta);
    bool ever_feasible = prev_residual <= 1e-6;
    bool converged = false;
    bool unbounded = false;

    // iterates can drift along directions that improve the raw objective
    // without improving any certified bound (the shared zeta makes such
    // rays possible); stop when the certified bound stagnates or the
    // iterate scale runs away
    double cost_scale = 0.0;
    for (const auto& c : program.constraints) cost_scale = std::max(cost_scale, c.cost);
    const double scale_cap = 1e6 * (1.0 + cost_scale / (1.0 - program.gamma));
    int stagnant = 0;

    for (int iteration = 1; iteration <= settings.max_iterations; ++iteration) {
        const bool pin = prev_residual <= 1e-9;
        double merit_before = merit(program, x, tau);

        IterateState candidate = x;
        int lp_iterations = 0;
        bool stepped = false;
        int retries = 0;
        while (retries < 40) {
            lp::Problem subproblem =
                linearize_g2(program, x.v, x.lambda, x.zeta, tau, pin, 0.0);
            lp::Solution sol = lp::solve_auto(subproblem);
            if (sol.status == lp::Status::Unbounded) {
                if (program.measure.kind == RiskKind::Expectation) {
                    unbounded = true;
                    break;
                }
                double radius = 10.0;
                for (double val : x.v) radius = std::max(radius, 10.0 * std::fabs(val));
                radius = std::max(radius, 10.0 * std::fabs(x.zeta));
                subproblem = linearize_g2(program, x.v, x.lambda, x.zeta, tau, pin, radius);
                sol = lp::solve_auto(subproblem);
            }
            if (sol.status != lp::Status::Optimal && pin &&
                sol.status == lp::Status::Infeasible) {
                // should not happen from a feasible center; relax the slacks
                subproblem = linearize_g2(program, x.v, x.lambda, x.zeta, tau, false, 0.0);
                sol = lp::solve_auto(subproblem);
            }
            if (sol.status != lp::Status::Optimal) {
                unbounded = sol.status == lp::Status::Unbounded;
                break;
            }
            lp_iterations = sol.iterations;
            candidate.v.assign(sol.x.begin(), sol.x.begin() + S);
            candidate.lambda.assign(sol.x.begin() + S, sol.x.begin() + S + nc);
            candidate.zeta = program.has_zeta() ? sol.x[program.zeta_index()] : 1.0;

            double cand_residual =
                program.max_residual(candidate.v, candidate.lambda, candidate.zeta);
            if (std::max(cand_residual, 0.0) > std::max(prev_residual, 0.0) + 1e-6 &&
                tau < settings.tau_cap) {
                tau = std::min(tau * settings.mu, settings.tau_cap);
                ++retries;
                continue; // recompute the step at the stiffer penalty
            }
            stepped = true;
            break;
        }
        if (!stepped) break;

        x = candidate;
        double objective = raw_objective(program, x);
        double residual = program.max_residual(x.v, x.lambda, x.zeta);
        ever_feasible = ever_feasible || residual <= 1e-6;

        CertifiedPoint cert = certify_point(program, x.v, x.lambda, x.zeta);
        if (cert.bound > out.certified_bound + settings.objective_tolerance) {
            stagnant = 0;
        } else {
            ++stagnant;
        }
        if (cert.bound > out.certified_bound) {
            out.certified_v = cert.v;
            out.certified_lambda = cert.lambda;
            out.certified_bound = cert.bound;
            out.certified_residual = cert.residual_before_repair;
        }

        CcpIterate record;
        record.iteration = iteration;
        record.tau = tau;
        record.penalized_objective_before = merit_before;
        record.penalized_objective = merit(program, x, tau);
        record.max_true_residual = residual;
        record.certified_bound = cert.bound;
        record.lp_iterations = lp_iterations;
        out.trace.push_back(record);

        // penalties keep growing while the iterate chain stays infeasible
        if (residual > 1e-6 && tau < settings.tau_cap)
            tau = std::min(tau * settings.mu, settings.tau_cap);

        if (std::fabs(objective - prev_objective) <= settings.objective_tolerance &&
            residual <= 1e-6) {
            converged = true;
            prev_objective = objective;
            prev_residual = residual;
            break;
        }
        prev_objective = objective;
        prev_residual = residual;

        double scale = std::fabs(x.zeta);
        for (double val : x.v) scale = std::max(scale, std::fabs(val));
        for (double val : x.lambda) scale = std::max(scale, std::fabs(val));
        if (stagnant >= 8 || scale > scale_cap) break;
    }

    out.v = x.v;
    out.lambda = x.lambda;
    if (program.has_zeta()) out.zeta = x.zeta;
    out.objective = prev_objective;
    out.max_residual = program.max_residual(x.v, x.lambda, x.zeta);
    out.feasible = out.max_residual <= 1e-6;
    if (unbounded)
        out.status = CcpStatus::Unbounded;
    else if (converged)
        out.status = CcpStatus::Converged;
    else if (!ever_feasible && !out.feasible)
        out.status = CcpStatus::NoFeasiblePoint;
    else
        out.status = CcpStatus::MaxIterations;
    return out;
}

ExpectationLpResult solve_expectation_lp(const Mdp& mdp, const std::vector<double>& beta) {
    if (static_cast<int>(beta.size()) != mdp.num_constraints())
        throw std::invalid_argument("solve_expectation_lp: beta arity mismatch");
    for (double b : beta)
        if (!(b > 0.0)) throw std::invalid_argument("solve_expectation_lp: beta must be positive");

    const int S = mdp.num_states;
    const int nc = mdp.num_constraints();
    lp::Problem problem;
    for (int s = 0; s < S; ++s)
        problem.add_variable(-mdp.initial_distribution[s], -lp::kInf, lp::kInf);
    for (int i = 0; i < nc; ++i) problem.add_variable(beta[i], 0.0, lp::kInf);

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const auto& row = mdp.transition[s][a];
            std::vector<int> index;
            std::vector<double> value;
            double self = 1.0;
            for (std::size_t k = 0; k < row.support.size(); ++k) {
                if (row.support[k] == s) {
                    self -= mdp.discount * row.probabilities[k];
                } else {
                    index.push_back(row.support[k]);
                    value.push_back(-mdp.discount * row.probabilities[k]);
                }
            }
            index.push_back(s);
            value.push_back(self);
            for (int i = 0; i < nc; ++i) {
                if (mdp.constraint_costs[i][s][a] == 0.0) continue;
                index.push_back(S + i);
                value.push_back(-mdp.constraint_costs[i][s][a]);
            }
            problem.add_le_row(std::move(index), std::move(value), mdp.cost[s][a]);
        }
    }

    lp::Solution sol = lp::solve_auto(problem);
    ExpectationLpResult out;
    out.status = sol.status;
    out.lp_iterations = sol.iterations;
    if (sol.status == lp::Status::Optimal) {
        out.v.assign(sol.x.begin(), sol.x.begin() + S);
        out.lambda.assign(sol.x.begin() + S, sol.x.end());
        out.objective = -sol.objective; // solver minimizes the negation
    }
    return out;
}

void write_ccp_trace_csv(std::ostream& out, const std::vector<CcpIterate>& trace) {
    out << "iteration,penalized_objective,max_true_residual,tau\n";
    for (const auto& record : trace)
        out << record.iteration << "," << record.penalized_objective << ","
            << record.max_true_residual << "," << record.tau << "\n";
}

} // namespace riskmdp
