#include "riskmdp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskmdp {

namespace {

constexpr double kZetaFloor = 1e-8;
constexpr double kZetaCap = 1e6;

void check_inputs(std::span<const double> values, const DiscreteDistribution& dist) {
    if (values.size() != dist.size())
        throw std::invalid_argument("sigma: value/distribution length mismatch");
    if (dist.size() == 0)
        throw std::invalid_argument("sigma: empty distribution");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("sigma: non-finite value");
}

} // namespace

std::string to_string(RiskKind kind) {
    switch (kind) {
        case RiskKind::Expectation: return "expectation";
        case RiskKind::CVaR: return "cvar";
        case RiskKind::EVaR: return "evar";
    }
    return "?";
}

RiskKind risk_kind_from_string(const std::string& name) {
    if (name == "expectation") return RiskKind::Expectation;
    if (name == "cvar") return RiskKind::CVaR;
    if (name == "evar") return RiskKind::EVaR;
    throw std::invalid_argument("unknown risk measure: " + name);
}

SigmaResult expectation_sigma(std::span<const double> values, const DiscreteDistribution& dist) {
    check_inputs(values, dist);
    SigmaResult result;
    result.subgradient.assign(dist.probabilities.begin(), dist.probabilities.end());
    result.value = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j)
        result.value += dist.probabilities[j] * values[j];
    return result;
}

SigmaResult cvar_sigma(std::span<const double> values, const DiscreteDistribution& dist,
                       double epsilon) {
    check_inputs(values, dist);
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("cvar_sigma: epsilon outside (0,1]");

    const std::size_t n = dist.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    // zeta* = smallest atom value with P[X > zeta] <= epsilon; this is the
    // left endpoint of the flat region of the piecewise-linear objective.
    double zeta = values[order.back()];
    {
        double above_mass = 0.0; // mass strictly above the current value group
        std::size_t k = n;
        while (k > 0) {
            const double group_value = values[order[k - 1]];
            double group_mass = 0.0;
            while (k > 0 && values[order[k - 1]] == group_value) {
                group_mass += dist.probabilities[order[k - 1]];
                --k;
            }
            if (above_mass <= epsilon)
                zeta = group_value;
            else
                break;
            above_mass += group_mass;
        }
    }

    double above = 0.0;
    double at = 0.0;
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (values[j] > zeta) {
            above += dist.probabilities[j];
            value += dist.probabilities[j] * (values[j] - zeta);
        } else if (values[j] == zeta) {
            at += dist.probabilities[j];
        }
    }
    SigmaResult result;
    result.value = zeta + value / epsilon;
    result.zeta_star = zeta;
    result.subgradient.assign(n, 0.0);
    const double remainder = 1.0 - above / epsilon; // mass left for the quantile atom
    for (std::size_t j = 0; j < n; ++j) {
        if (values[j] > zeta)
            result.subgradient[j] = dist.probabilities[j] / epsilon;
        else if (values[j] == zeta && at > 0.0)
            result.subgradient[j] = std::max(0.0, remainder) * dist.probabilities[j] / at;
    }
    return result;
}

namespace {

struct Lse {
    // log sum exp terms shifted by vmax: S(zeta) = sum p e^{zeta (v - vmax)}
    std::span<const double> values;
    std::span<const double> probs;
    double vmax;

    double s(double zeta) const {
        double total = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j)
            total += probs[j] * std::exp(zeta * (values[j] - vmax));
        return total;
    }
    // N(zeta) = zeta K'(zeta) - K(zeta) + log eps; nondecreasing in zeta,
    // its sign is the sign of the EVaR objective's derivative.
    double derivative_numerator(double zeta, double log_eps) const {
        double total = 0.0, tilt = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            double w = probs[j] * std::exp(zeta * (values[j] - vmax));
            total += w;
            tilt += w * (values[j] - vmax);
        }
        return zeta * tilt / total - std::log(total) + log_eps;
    }
    double objective(double zeta, double log_eps) const {
        return vmax + (std::log(s(zeta)) - log_eps) / zeta;
    }
    // Newton refinement of the derivative root; N'(zeta) = zeta * Var_tilted(v).
    double polish(double zeta, double log_eps, double lo, double hi) const {
        for (int it = 0; it < 12; ++it) {
            double total = 0.0, tilt = 0.0, square = 0.0;
            for (std::size_t j = 0; j < values.size(); ++j) {
                double x = values[j] - vmax;
                double w = probs[j] * std::exp(zeta * x);
                total += w;
                tilt += w * x;
                square += w * x * x;
            }
            double mean = tilt / total;
            double numer = zeta * mean - std::log(total) + log_eps;
            double variance = square / total - mean * mean;
            double slope = zeta * variance;
            if (!(slope > 0.0)) break;
            double next = zeta - numer / slope;
            if (!std::isfinite(next) || next <= lo || next >= hi) break;
            bool done = std::fabs(next - zeta) <= 1e-14 * std::max(1.0, zeta);
            zeta = next;
            if (done) break;
        }
        return zeta;
    }
    std::vector<double> tilted_weights(double zeta) const {
        std::vector<double> w(values.size());
        double total = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            w[j] = probs[j] * std::exp(zeta * (values[j] - vmax));
            total += w[j];
        }
        for (double& x : w) x /= total;
        return w;
    }
};

} // namespace

SigmaResult evar_sigma(std::span<const double> values, const DiscreteDistribution& dist,
                       double epsilon, double zeta_hint) {
    check_inputs(values, dist);
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("evar_sigma: epsilon outside (0,1]");

    const std::size_t n = dist.size();
    const double vmax = *std::max_element(values.begin(), values.end());
    const double vmin = *std::min_element(values.begin(), values.end());

    SigmaResult result;
    if (vmax - vmin <= 1e-14 * std::max(1.0, std::fabs(vmax))) {
        // constant variable: objective is value + log(1/eps)/zeta, infimum at
        // zeta -> infinity equals the value itself
        result.value = vmax;
        result.zeta_star = kZetaCap;
        result.subgradient.assign(dist.probabilities.begin(), dist.probabilities.end());
        return result;
    }
    if (epsilon == 1.0) {
        // objective decreases to the mean as zeta -> 0; return the limit
        SigmaResult mean = expectation_sigma(values, dist);
        mean.zeta_star = kZetaFloor;
        return mean;
    }

    const double log_eps = std::log(epsilon);
    Lse lse{values, std::span<const double>(dist.probabilities), vmax};

    // Bracket the sign change of the derivative. N(0+) = log eps < 0.
    double lo = kZetaFloor;
    double hi = zeta_hint > 0.0 ? std::clamp(zeta_hint, kZetaFloor, kZetaCap) : 1.0;
    if (zeta_hint > 0.0) {
        lo = std::max(kZetaFloor, hi / 8.0);
        while (lo > kZetaFloor && lse.derivative_numerator(lo, log_eps) > 0.0)
            lo = std::max(kZetaFloor, lo / 8.0);
    }
    while (hi < kZetaCap && lse.derivative_numerator(hi, log_eps) <= 0.0)
        hi = std::min(kZetaCap, hi * 8.0);

    if (lse.derivative_numerator(hi, log_eps) <= 0.0) {
        // Derivative never turns positive below the cap: epsilon <= P[X = max],
        // the infimum is the essential supremum in the zeta -> infinity limit.
        result.value = vmax;
        result.zeta_star = hi;
        result.subgradient.assign(n, 0.0);
        double top = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (values[j] == vmax) top += dist.probabilities[j];
        for (std::size_t j = 0; j < n; ++j)
            if (values[j] == vmax) result.subgradient[j] = dist.probabilities[j] / top;
        return result;
    }

    // Golden-section on the unimodal objective narrows the bracket, then a
    // safeguarded Newton pass on the derivative root reaches 1e-10 relative
    // accuracy in a handful of steps.
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = lse.objective(c, log_eps);
    double fd = lse.objective(d, log_eps);
    while (b - a > 1e-3 * std::max(1.0, b)) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = lse.objective(c, log_eps);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = lse.objective(d, log_eps);
        }
    }
    const double zeta = lse.polish(0.5 * (a + b), log_eps, 0.5 * lo, 2.0 * hi);
    result.value = lse.objective(zeta, log_eps);
    result.zeta_star = zeta;
    result.subgradient = lse.tilted_weights(zeta);
    return result;
}

SigmaResult sigma(const RiskMeasure& measure, std::span<const double> values,
                  const DiscreteDistribution& dist) {
    switch (measure.kind) {
        case RiskKind::Expectation: return expectation_sigma(values, dist);
        case RiskKind::CVaR: return cvar_sigma(values, dist, measure.epsilon);
        case RiskKind::EVaR: return evar_sigma(values, dist, measure.epsilon);
    }
    throw std::invalid_argument("sigma: unsupported measure kind");
}

SigmaResult sigma_over_states(const RiskMeasure& measure, std::span<const double> state_values,
                              const DiscreteDistribution& dist, double zeta_hint) {
    std::vector<double> local(dist.size());
    for (std::size_t j = 0; j < dist.size(); ++j) {
        int s = dist.support[j];
        if (s < 0 || s >= static_cast<int>(state_values.size()))
            throw std::out_of_range("sigma_over_states: support index out of range");
        local[j] = state_values[s];
    }
    if (measure.kind == RiskKind::EVaR)
        return evar_sigma(local, dist, measure.epsilon, zeta_hint);
    return sigma(measure, local, dist);
}

} // namespace riskmdp
