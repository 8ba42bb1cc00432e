#pragma once

// Shared test fixtures and independent oracles. Everything here is kept
// deliberately separate from the library implementation paths it checks,
// except where noted (instance construction may call library evaluators).

#include "riskmdp/distribution.hpp"
#include "riskmdp/mdp.hpp"
#include "riskmdp/planner.hpp"
#include "riskmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testsupport {

using riskmdp::DiscreteDistribution;
using riskmdp::Mdp;

struct Fixture {
    std::vector<double> values;
    DiscreteDistribution dist;
    double epsilon;
};

inline Fixture random_fixture(std::mt19937_64& rng, double eps_min = 0.02,
                              double eps_max = 1.0, int max_support = 8) {
    using riskmdp::next_double;
    int n = 1 + static_cast<int>(next_double(rng) * max_support);
    std::vector<double> values(n), probs(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        values[i] = -50.0 + 100.0 * next_double(rng);
        probs[i] = 0.05 + next_double(rng);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    std::vector<int> support(n);
    for (int i = 0; i < n; ++i) support[i] = i;
    double eps = eps_min + (eps_max - eps_min) * next_double(rng);
    return Fixture{values, DiscreteDistribution(support, probs), eps};
}

/// Independent CVaR oracle: 1-D search of zeta + (1/eps) E(v - zeta)_+ over
/// [min v, max v] on a fixed grid plus the breakpoints of the piecewise
/// linear objective (the atom values), where its minimum must sit.
inline double cvar_grid_search(const std::vector<double>& values,
                               const std::vector<double>& probs, double eps,
                               double step = 1e-4) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    auto objective = [&](double zeta) {
        double tail = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j)
            tail += probs[j] * std::max(values[j] - zeta, 0.0);
        return zeta + tail / eps;
    };
    double best = std::numeric_limits<double>::infinity();
    long steps = static_cast<long>((hi - lo) / step) + 1;
    for (long k = 0; k <= steps; ++k) best = std::min(best, objective(std::min(lo + k * step, hi)));
    for (double zeta : values) best = std::min(best, objective(zeta));
    return best;
}

/// Classical expected-cost value iteration, written directly against the
/// MDP arrays (no risk-module code).
inline std::vector<double> classical_value_iteration(const Mdp& mdp,
                                                     const std::vector<double>& lambda,
                                                     double tol = 1e-10) {
    std::vector<double> v(mdp.num_states, 0.0);
    std::vector<double> next(mdp.num_states, 0.0);
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.num_actions; ++a) {
                double combined = mdp.cost[s][a];
                for (std::size_t i = 0; i < lambda.size(); ++i)
                    combined += lambda[i] * mdp.constraint_costs[i][s][a];
                double ev = 0.0;
                const auto& row = mdp.transition[s][a];
                for (std::size_t k = 0; k < row.support.size(); ++k)
                    ev += row.probabilities[k] * v[row.support[k]];
                best = std::min(best, combined + mdp.discount * ev);
            }
            next[s] = best;
            delta = std::max(delta, std::fabs(next[s] - v[s]));
        }
        v.swap(next);
        if (delta < tol) break;
    }
    return v;
}

/// Classical fixed-policy expected-cost evaluation (plain loops).
inline std::vector<double> classical_policy_evaluation(const Mdp& mdp,
                                                       const std::vector<int>& policy,
                                                       const std::vector<std::vector<double>>& costs,
                                                       double tol = 1e-11) {
    std::vector<double> v(mdp.num_states, 0.0);
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            int a = policy[s];
            double ev = 0.0;
            const auto& row = mdp.transition[s][a];
            for (std::size_t k = 0; k < row.support.size(); ++k)
                ev += row.probabilities[k] * v[row.support[k]];
            double next = costs[s][a] + mdp.discount * ev;
            delta = std::max(delta, std::fabs(next - v[s]));
            v[s] = next;
        }
        if (delta < tol) break;
    }
    return v;
}

/// Lagrangian dual over a lambda grid (single budget): enumerate every
/// deterministic policy, pre-compute (J, D), then take
/// sup_lambda min_pi [J + lambda (D - beta)] with local grid refinement.
inline double lagrangian_dual_grid(const Mdp& mdp, double beta) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    std::vector<std::pair<double, double>> outcomes; // (J, D) per policy
    std::vector<int> policy(S, 0);
    auto kappa_dot = [&](const std::vector<double>& v) {
        double out = 0.0;
        for (int s = 0; s < S; ++s) out += mdp.initial_distribution[s] * v[s];
        return out;
    };
    while (true) {
        outcomes.emplace_back(kappa_dot(classical_policy_evaluation(mdp, policy, mdp.cost)),
                              kappa_dot(classical_policy_evaluation(
                                  mdp, policy, mdp.constraint_costs[0])));
        int s = S - 1;
        while (s >= 0) {
            if (++policy[s] < A) break;
            policy[s] = 0;
            --s;
        }
        if (s < 0) break;
    }
    auto dual = [&](double lambda) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [j, d] : outcomes) best = std::min(best, j + lambda * (d - beta));
        return best;
    };
    double best_lambda = 0.0, best_value = dual(0.0);
    double width = 100.0, lo = 0.0;
    for (int pass = 0; pass < 6; ++pass) {
        for (int k = 0; k <= 400; ++k) {
            double lam = lo + width * k / 400.0;
            double val = dual(lam);
            if (val > best_value) {
                best_value = val;
                best_lambda = lam;
            }
        }
        width = 2.0 * width / 400.0;
        lo = std::max(0.0, best_lambda - width / 2.0);
    }
    return best_value;
}

/// Budgets that keep the constrained problem feasible under `risk`: the
/// nested risk of each constraint cost along a reference policy, padded by
/// `margin` (> 1). Instance construction only; assertions never use this.
inline std::vector<double> feasible_budgets(const Mdp& mdp, const riskmdp::RiskMeasure& risk,
                                            double margin = 1.3) {
    riskmdp::Policy reference(mdp.num_states, 0);
    std::vector<double> budgets;
    for (int i = 0; i < mdp.num_constraints(); ++i)
        budgets.push_back(
            riskmdp::policy_risk_evaluation(mdp, reference, mdp.constraint_costs[i], risk) *
                margin +
            0.1);
    return budgets;
}

/// Random dense MDP with non-negative costs; kappa0 is a random simplex
/// point. Rows are exponential draws normalized to one.
inline Mdp random_mdp(std::uint64_t seed, int num_states, int num_actions,
                      int num_constraints, double discount) {
    using riskmdp::next_double;
    std::mt19937_64 rng(seed);
    Mdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.transition.resize(num_states);
    mdp.cost.assign(num_states, std::vector<double>(num_actions, 0.0));
    mdp.constraint_costs.assign(
        num_constraints,
        std::vector<std::vector<double>>(num_states, std::vector<double>(num_actions, 0.0)));
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            std::vector<int> support;
            std::vector<double> probs;
            double total = 0.0;
            for (int j = 0; j < num_states; ++j) {
                double w = -std::log(1.0 - next_double(rng));
                support.push_back(j);
                probs.push_back(w);
                total += w;
            }
            for (double& p : probs) p /= total;
            mdp.transition[s].emplace_back(std::move(support), std::move(probs));
            mdp.cost[s][a] = 5.0 * next_double(rng);
            for (int i = 0; i < num_constraints; ++i)
                mdp.constraint_costs[i][s][a] = 3.0 * next_double(rng);
        }
    }
    mdp.initial_distribution.assign(num_states, 0.0);
    double total = 0.0;
    for (int s = 0; s < num_states; ++s) {
        mdp.initial_distribution[s] = 0.1 + next_double(rng);
        total += mdp.initial_distribution[s];
    }
    for (double& p : mdp.initial_distribution) p /= total;
    return mdp;
}

} // namespace testsupport
