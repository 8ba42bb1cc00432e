#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace riskmdp {

/// Discrete probability distribution over successor state indices.
/// Support entries are distinct and sorted; probabilities are strictly
/// positive (zero-mass atoms are pruned on construction).
struct DiscreteDistribution {
    std::vector<int> support;
    std::vector<double> probabilities;

    DiscreteDistribution() = default;
    DiscreteDistribution(std::vector<int> states, std::vector<double> probs);

    std::size_t size() const { return support.size(); }

    /// Point mass on a single state.
    static DiscreteDistribution point_mass(int state) {
        return DiscreteDistribution({state}, {1.0});
    }
};

inline DiscreteDistribution::DiscreteDistribution(std::vector<int> states,
                                                  std::vector<double> probs) {
    if (states.size() != probs.size())
        throw std::invalid_argument("distribution: support/probability size mismatch");
    // prune zero atoms, keep input order (callers pass sorted supports)
    support.reserve(states.size());
    probabilities.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (probs[i] != 0.0) {
            support.push_back(states[i]);
            probabilities.push_back(probs[i]);
        }
    }
}

} // namespace riskmdp
