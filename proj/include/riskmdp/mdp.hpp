#pragma once

#include "riskmdp/distribution.hpp"

#include <string>
#include <vector>

namespace riskmdp {

/// Finite MDP with one objective cost and any number of constraint costs.
///
/// Rows of `transition` are probability distributions over successor states.
/// Values are immutable after construction and safe to share across threads.
struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<std::vector<DiscreteDistribution>> transition; // [state][action]
    std::vector<std::vector<double>> cost;                     // objective c(s,a)
    std::vector<std::vector<std::vector<double>>> constraint_costs; // [i][state][action]
    std::vector<double> initial_distribution;                  // kappa0
    double discount = 0.95;                                    // gamma in (0,1)

    int num_constraints() const { return static_cast<int>(constraint_costs.size()); }
};

/// One violated invariant, with enough location info to act on it.
struct ValidationIssue {
    std::string what;
    int state = -1;  // -1 when not tied to a state
    int action = -1; // -1 when not tied to an action
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string summary() const;
};

/// Checks every structural and stochasticity invariant. Never throws;
/// all violations are collected into the report.
ValidationReport validate_mdp(const Mdp& mdp);

/// Stored transition row with zero-probability entries pruned.
/// Throws std::out_of_range for invalid indices.
DiscreteDistribution successor_distribution(const Mdp& mdp, int state, int action);

/// JSON serialization (schema: states, actions, transition, cost,
/// constraint_costs, kappa0, gamma). Probabilities round-trip exactly.
std::string write_mdp_json(const Mdp& mdp);
Mdp read_mdp_json(const std::string& text);
void write_mdp_file(const Mdp& mdp, const std::string& path);
Mdp read_mdp_file(const std::string& path);

} // namespace riskmdp
