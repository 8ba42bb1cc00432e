#pragma once

#include "riskmdp/distribution.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskmdp {

enum class RiskKind { Expectation, CVaR, EVaR };

/// One-step coherent risk measure choice. `epsilon` is the confidence
/// level in (0, 1]; a value near 1 is risk-neutral, near 0 risk-averse.
/// It is ignored for Expectation.
struct RiskMeasure {
    RiskKind kind = RiskKind::Expectation;
    double epsilon = 1.0;

    static RiskMeasure expectation() { return {RiskKind::Expectation, 1.0}; }
    static RiskMeasure cvar(double epsilon) { return {RiskKind::CVaR, epsilon}; }
    static RiskMeasure evar(double epsilon) { return {RiskKind::EVaR, epsilon}; }
};

std::string to_string(RiskKind kind);
RiskKind risk_kind_from_string(const std::string& name);

/// Result of evaluating a risk transition mapping sigma(v, s, p).
///
/// `subgradient` is aligned with the distribution's support and is a
/// valid subgradient of sigma in v. For all three measures it is a
/// probability re-weighting of p (entries >= 0, summing to 1), which is
/// what makes the linearized Bellman constraints contractions.
struct SigmaResult {
    double value = 0.0;
    std::optional<double> zeta_star; // minimizing zeta for CVaR / EVaR
    std::vector<double> subgradient;
};

/// sigma = sum_j p_j v_j; the risk-neutral transition mapping.
SigmaResult expectation_sigma(std::span<const double> values, const DiscreteDistribution& dist);

/// sigma = inf_zeta { zeta + (1/epsilon) sum_j p_j (v_j - zeta)_+ },
/// solved in closed form: zeta* is the (1-epsilon)-quantile of the
/// discrete distribution (smallest minimizer on atom-boundary ties).
SigmaResult cvar_sigma(std::span<const double> values, const DiscreteDistribution& dist,
                       double epsilon);

/// sigma = inf_{zeta>0} log(sum_j p_j e^{zeta v_j} / epsilon) / zeta via
/// bracketed 1-D minimization of the log-sum-exp objective (stabilized by
/// shifting with max v). When every value is equal, or epsilon = 1, the
/// analytic limit is returned directly. An optional `zeta_hint` narrows
/// the initial bracket (used by value-iteration loops).
SigmaResult evar_sigma(std::span<const double> values, const DiscreteDistribution& dist,
                       double epsilon, double zeta_hint = 0.0);

/// Uniform dispatch over the three evaluators.
SigmaResult sigma(const RiskMeasure& measure, std::span<const double> values,
                  const DiscreteDistribution& dist);

/// Convenience: sigma over a full state-value vector, where `dist`
/// indexes into `state_values` by support state.
SigmaResult sigma_over_states(const RiskMeasure& measure, std::span<const double> state_values,
                              const DiscreteDistribution& dist, double zeta_hint = 0.0);

} // namespace riskmdp
