#include "riskmdp/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace riskmdp {

namespace {

constexpr double kSumTolerance = 1e-9;

bool finite(double x) { return std::isfinite(x); }

void check_cost_table(const std::vector<std::vector<double>>& table, const char* name,
                      int num_states, int num_actions, ValidationReport& report) {
    if (static_cast<int>(table.size()) != num_states) {
        report.issues.push_back({std::string(name) + ": wrong number of state rows", -1, -1});
        return;
    }
    for (int s = 0; s < num_states; ++s) {
        if (static_cast<int>(table[s].size()) != num_actions) {
            report.issues.push_back({std::string(name) + ": wrong number of actions", s, -1});
            continue;
        }
        for (int a = 0; a < num_actions; ++a) {
            double v = table[s][a];
            if (!finite(v))
                report.issues.push_back({std::string(name) + ": non-finite value", s, a});
            else if (v < 0.0)
                report.issues.push_back({std::string(name) + ": negative value " + std::to_string(v), s, a});
        }
    }
}

} // namespace

std::string ValidationReport::summary() const {
    std::ostringstream out;
    for (const auto& issue : issues) {
        out << issue.what;
        if (issue.state >= 0) out << " at state " << issue.state;
        if (issue.action >= 0) out << ", action " << issue.action;
        out << "\n";
    }
    return out.str();
}

ValidationReport validate_mdp(const Mdp& mdp) {
    ValidationReport report;
    if (mdp.num_states <= 0)
        report.issues.push_back({"no states", -1, -1});
    if (mdp.num_actions <= 0)
        report.issues.push_back({"no actions", -1, -1});
    if (!(mdp.discount > 0.0 && mdp.discount < 1.0) || !finite(mdp.discount))
        report.issues.push_back({"discount " + std::to_string(mdp.discount) + " outside (0,1)", -1, -1});

    if (static_cast<int>(mdp.transition.size()) != mdp.num_states) {
        report.issues.push_back({"transition: wrong number of state rows", -1, -1});
    } else {
        for (int s = 0; s < mdp.num_states; ++s) {
            if (static_cast<int>(mdp.transition[s].size()) != mdp.num_actions) {
                report.issues.push_back({"transition: wrong number of actions", s, -1});
                continue;
            }
            for (int a = 0; a < mdp.num_actions; ++a) {
                const auto& row = mdp.transition[s][a];
                double sum = 0.0;
                std::set<int> seen;
                for (std::size_t k = 0; k < row.support.size(); ++k) {
                    int j = row.support[k];
                    double p = row.probabilities[k];
                    if (j < 0 || j >= mdp.num_states)
                        report.issues.push_back({"transition: successor index " + std::to_string(j) + " out of range", s, a});
                    else if (!seen.insert(j).second)
                        report.issues.push_back({"transition: duplicate successor " + std::to_string(j), s, a});
                    if (!finite(p) || p < 0.0)
                        report.issues.push_back({"transition: bad probability " + std::to_string(p), s, a});
                    sum += p;
                }
                if (!(std::fabs(sum - 1.0) <= kSumTolerance))
                    report.issues.push_back({"transition: row sums to " + std::to_string(sum) +
                                                 " (deficit " + std::to_string(1.0 - sum) + ")",
                                             s, a});
            }
        }
    }

    check_cost_table(mdp.cost, "objective cost", mdp.num_states, mdp.num_actions, report);
    for (std::size_t i = 0; i < mdp.constraint_costs.size(); ++i) {
        std::string name = "constraint cost " + std::to_string(i);
        check_cost_table(mdp.constraint_costs[i], name.c_str(), mdp.num_states, mdp.num_actions, report);
    }

    if (static_cast<int>(mdp.initial_distribution.size()) != mdp.num_states) {
        report.issues.push_back({"kappa0: wrong length", -1, -1});
    } else {
        double sum = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            double p = mdp.initial_distribution[s];
            if (!finite(p) || p < 0.0)
                report.issues.push_back({"kappa0: negative or non-finite entry " + std::to_string(p), s, -1});
            sum += p;
        }
        if (!(std::fabs(sum - 1.0) <= kSumTolerance))
            report.issues.push_back({"kappa0: sums to " + std::to_string(sum), -1, -1});
    }
    return report;
}

DiscreteDistribution successor_distribution(const Mdp& mdp, int state, int action) {
    if (state < 0 || state >= mdp.num_states)
        throw std::out_of_range("successor_distribution: state out of range");
    if (action < 0 || action >= mdp.num_actions)
        throw std::out_of_range("successor_distribution: action out of range");
    // rows are pruned on construction; rebuild defensively for hand-made MDPs
    const auto& row = mdp.transition[state][action];
    return DiscreteDistribution(row.support, row.probabilities);
}

using nlohmann::json;

std::string write_mdp_json(const Mdp& mdp) {
    json doc;
    doc["states"] = mdp.num_states;
    doc["actions"] = mdp.num_actions;
    json rows = json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
        json per_action = json::array();
        for (int a = 0; a < mdp.num_actions; ++a) {
            std::vector<double> dense(mdp.num_states, 0.0);
            const auto& row = mdp.transition[s][a];
            for (std::size_t k = 0; k < row.support.size(); ++k)
                dense[row.support[k]] = row.probabilities[k];
            per_action.push_back(dense);
        }
        rows.push_back(std::move(per_action));
    }
    doc["transition"] = std::move(rows);
    doc["cost"] = mdp.cost;
    doc["constraint_costs"] = mdp.constraint_costs;
    doc["kappa0"] = mdp.initial_distribution;
    doc["gamma"] = mdp.discount;
    return doc.dump(2);
}

Mdp read_mdp_json(const std::string& text) {
    json doc = json::parse(text);
    Mdp mdp;
    mdp.num_states = doc.at("states").get<int>();
    mdp.num_actions = doc.at("actions").get<int>();
    mdp.discount = doc.at("gamma").get<double>();
    mdp.cost = doc.at("cost").get<std::vector<std::vector<double>>>();
    mdp.constraint_costs =
        doc.at("constraint_costs").get<std::vector<std::vector<std::vector<double>>>>();
    mdp.initial_distribution = doc.at("kappa0").get<std::vector<double>>();
    const json& rows = doc.at("transition");
    mdp.transition.resize(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        mdp.transition[s].reserve(mdp.num_actions);
        for (int a = 0; a < mdp.num_actions; ++a) {
            auto dense = rows.at(s).at(a).get<std::vector<double>>();
            std::vector<int> support;
            std::vector<double> probs;
            for (int j = 0; j < static_cast<int>(dense.size()); ++j) {
                if (dense[j] != 0.0) {
                    support.push_back(j);
                    probs.push_back(dense[j]);
                }
            }
            mdp.transition[s].emplace_back(std::move(support), std::move(probs));
        }
    }
    return mdp;
}

void write_mdp_file(const Mdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << write_mdp_json(mdp) << "\n";
}

Mdp read_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return read_mdp_json(buffer.str());
}

} // namespace riskmdp
