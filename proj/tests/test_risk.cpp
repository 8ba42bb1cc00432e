#include "riskmdp/risk.hpp"
#include "riskmdp/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace riskmdp;
using testsupport::random_fixture;

namespace {

DiscreteDistribution dist2(double p0, double p1) {
    return DiscreteDistribution({0, 1}, {p0, p1});
}

double sigma_value(const RiskMeasure& m, const std::vector<double>& v,
                   const DiscreteDistribution& d) {
    return sigma(m, v, d).value;
}

} // namespace

TEST_CASE("expectation sigma: frozen examples") {
    std::vector<double> v{1.0, 3.0};
    CHECK(expectation_sigma(v, dist2(0.5, 0.5)).value == doctest::Approx(2.0));
    std::vector<double> point{7.0};
    CHECK(expectation_sigma(point, DiscreteDistribution::point_mass(0)).value ==
          doctest::Approx(7.0));
    std::vector<double> v2{0.0, 10.0};
    CHECK(expectation_sigma(v2, dist2(0.9, 0.1)).value == doctest::Approx(1.0));
    CHECK(expectation_sigma(v2, dist2(0.9, 0.1)).subgradient[0] == doctest::Approx(0.9));
    CHECK_THROWS_AS((void)expectation_sigma(std::vector<double>{1.0}, dist2(0.5, 0.5)),
                    std::invalid_argument);
}

TEST_CASE("cvar sigma: frozen examples validated against the grid-search oracle") {
    std::vector<double> v{0.0, 10.0};
    auto d = dist2(0.9, 0.1);
    // grid search over zeta in [0,10] at step 1e-4 gives 10.0 and 5.0
    CHECK(testsupport::cvar_grid_search(v, {0.9, 0.1}, 0.1) == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(testsupport::cvar_grid_search(v, {0.9, 0.1}, 0.2) == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(cvar_sigma(v, d, 0.1).value == doctest::Approx(10.0));
    CHECK(cvar_sigma(v, d, 0.2).value == doctest::Approx(5.0));
    CHECK(*cvar_sigma(v, d, 0.2).zeta_star == doctest::Approx(0.0)); // smallest minimizer
}

TEST_CASE("cvar sigma at epsilon 1 equals expectation") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        auto f = random_fixture(rng);
        double mean = expectation_sigma(f.values, f.dist).value;
        CHECK(cvar_sigma(f.values, f.dist, 1.0).value == doctest::Approx(mean).epsilon(1e-10));
    }
}

TEST_CASE("cvar closed form equals grid-search oracle on random fixtures") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 200; ++t) {
        auto f = random_fixture(rng, 0.05, 1.0, 5);
        std::vector<double> probs(f.dist.probabilities);
        double oracle = testsupport::cvar_grid_search(f.values, probs, f.epsilon);
        double got = cvar_sigma(f.values, f.dist, f.epsilon).value;
        CHECK(std::fabs(got - oracle) <= 1e-6 * std::max(1.0, std::fabs(oracle)) + 1e-6);
    }
}

TEST_CASE("evar sigma: point mass is translation exact for any epsilon") {
    std::vector<double> v{3.25};
    auto point = DiscreteDistribution::point_mass(0);
    for (double eps : {0.05, 0.15, 0.5, 0.99})
        CHECK(evar_sigma(v, point, eps).value == doctest::Approx(3.25).epsilon(1e-9));
}

TEST_CASE("evar sigma sits between cvar and the maximum") {
    std::vector<double> v{0.0, 10.0};
    auto d = dist2(0.9, 0.1);
    double cvar = cvar_sigma(v, d, 0.15).value;
    double evar = evar_sigma(v, d, 0.15).value;
    CHECK(evar >= cvar - 1e-8);
    CHECK(evar <= 10.0 + 1e-8);
}

TEST_CASE("evar sigma approaches the essential supremum as epsilon -> 0") {
    std::vector<double> v{0.0, 10.0};
    auto d = dist2(0.9, 0.1);
    CHECK(evar_sigma(v, d, 1e-6).value == doctest::Approx(10.0).epsilon(1e-4));
    CHECK(std::fabs(evar_sigma(v, d, 1e-6).value - 10.0) <= 1e-3);
}

TEST_CASE("evar sigma at epsilon 1 returns the mean limit") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
        auto f = random_fixture(rng);
        double mean = expectation_sigma(f.values, f.dist).value;
        CHECK(evar_sigma(f.values, f.dist, 1.0).value == doctest::Approx(mean).epsilon(1e-8));
    }
}

TEST_CASE("evar subgradient entries sum to one") {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 200; ++t) {
        auto f = random_fixture(rng);
        auto r = evar_sigma(f.values, f.dist, f.epsilon);
        double sum = 0.0;
        for (double g : r.subgradient) {
            CHECK(g >= -1e-12);
            sum += g;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("evar numerical stability: huge uniform shift") {
    std::mt19937_64 rng(15);
    for (int t = 0; t < 50; ++t) {
        auto f = random_fixture(rng);
        double base = evar_sigma(f.values, f.dist, f.epsilon).value;
        std::vector<double> shifted = f.values;
        for (double& x : shifted) x += 1e6;
        double moved = evar_sigma(shifted, f.dist, f.epsilon).value;
        CHECK(std::fabs(moved - 1e6 - base) <= 1e-5);
    }
}

TEST_CASE("sigma dispatch matches the direct evaluators") {
    std::mt19937_64 rng(16);
    auto f = random_fixture(rng);
    CHECK(sigma(RiskMeasure::expectation(), f.values, f.dist).value ==
          expectation_sigma(f.values, f.dist).value);
    CHECK(sigma(RiskMeasure::cvar(0.15), f.values, f.dist).value ==
          cvar_sigma(f.values, f.dist, 0.15).value);
    CHECK(sigma(RiskMeasure::evar(0.15), f.values, f.dist).value ==
          evar_sigma(f.values, f.dist, 0.15).value);
    CHECK_THROWS_AS((void)cvar_sigma(f.values, f.dist, 1.5), std::invalid_argument);
    CHECK_THROWS_AS((void)evar_sigma(f.values, f.dist, 0.0), std::invalid_argument);
}

TEST_CASE("coherence axioms hold on random fixtures for all measures") {
    std::mt19937_64 rng(17);
    const std::vector<RiskMeasure> measures = {RiskMeasure::expectation(),
                                               RiskMeasure::cvar(0.0), RiskMeasure::evar(0.0)};
    for (int t = 0; t < 400; ++t) {
        auto f = random_fixture(rng);
        for (RiskMeasure m : measures) {
            if (m.kind != RiskKind::Expectation) m.epsilon = f.epsilon;
            const std::size_t n = f.values.size();
            std::vector<double> other(n), blend(n);
            for (std::size_t j = 0; j < n; ++j)
                other[j] = -40.0 + 80.0 * next_double(rng);
            double w = next_double(rng);

            // convexity
            for (std::size_t j = 0; j < n; ++j)
                blend[j] = w * f.values[j] + (1.0 - w) * other[j];
            double lhs = sigma_value(m, blend, f.dist);
            double rhs = w * sigma_value(m, f.values, f.dist) +
                         (1.0 - w) * sigma_value(m, other, f.dist);
            CHECK(lhs <= rhs + 1e-8);

            // monotonicity
            std::vector<double> bigger = f.values;
            for (std::size_t j = 0; j < n; ++j) bigger[j] += next_double(rng);
            CHECK(sigma_value(m, bigger, f.dist) >= sigma_value(m, f.values, f.dist) - 1e-8);

            // translation invariance
            double shift = -5.0 + 10.0 * next_double(rng);
            std::vector<double> moved = f.values;
            for (double& x : moved) x += shift;
            CHECK(std::fabs(sigma_value(m, moved, f.dist) -
                            (sigma_value(m, f.values, f.dist) + shift)) <= 1e-8);

            // positive homogeneity
            double scale = 2.0 * next_double(rng);
            std::vector<double> scaled = f.values;
            for (double& x : scaled) x *= scale;
            CHECK(std::fabs(sigma_value(m, scaled, f.dist) -
                            scale * sigma_value(m, f.values, f.dist)) <= 1e-8);
        }
    }
}

TEST_CASE("risk ordering expectation <= cvar <= evar on random fixtures") {
    std::mt19937_64 rng(18);
    for (int t = 0; t < 500; ++t) {
        auto f = random_fixture(rng);
        double e = expectation_sigma(f.values, f.dist).value;
        double c = cvar_sigma(f.values, f.dist, f.epsilon).value;
        double v = evar_sigma(f.values, f.dist, f.epsilon).value;
        CHECK(e <= c + 1e-8);
        CHECK(c <= v + 1e-8);
    }
}

TEST_CASE("subgradients support the function from below") {
    std::mt19937_64 rng(19);
    const std::vector<RiskKind> kinds = {RiskKind::Expectation, RiskKind::CVaR, RiskKind::EVaR};
    for (int t = 0; t < 60; ++t) {
        auto f = random_fixture(rng);
        for (RiskKind kind : kinds) {
            RiskMeasure m{kind, f.epsilon};
            auto r = sigma(m, f.values, f.dist);
            for (int probe = 0; probe < 100; ++probe) {
                std::vector<double> v2(f.values.size());
                for (std::size_t j = 0; j < v2.size(); ++j)
                    v2[j] = f.values[j] - 10.0 + 20.0 * next_double(rng);
                double rhs = r.value;
                for (std::size_t j = 0; j < v2.size(); ++j)
                    rhs += r.subgradient[j] * (v2[j] - f.values[j]);
                CHECK(sigma(m, v2, f.dist).value >= rhs - 1e-7);
            }
        }
    }
}

TEST_CASE("monotone bump raises sigma for all measures") {
    std::vector<double> v{1.0, 2.0, 3.0};
    DiscreteDistribution d({0, 1, 2}, {0.3, 0.4, 0.3});
    for (auto m : {RiskMeasure::expectation(), RiskMeasure::cvar(0.3), RiskMeasure::evar(0.3)}) {
        double base = sigma(m, v, d).value;
        for (std::size_t j = 0; j < v.size(); ++j) {
            std::vector<double> bumped = v;
            bumped[j] += 1.0;
            CHECK(sigma(m, bumped, d).value >= base - 1e-10);
        }
    }
}

TEST_CASE("cvar subgradient is a probability re-weighting of p") {
    std::mt19937_64 rng(20);
    for (int t = 0; t < 200; ++t) {
        auto f = random_fixture(rng);
        auto r = cvar_sigma(f.values, f.dist, f.epsilon);
        double sum = 0.0;
        for (std::size_t j = 0; j < r.subgradient.size(); ++j) {
            CHECK(r.subgradient[j] >= -1e-12);
            CHECK(r.subgradient[j] <= f.dist.probabilities[j] / f.epsilon + 1e-9);
            sum += r.subgradient[j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}
