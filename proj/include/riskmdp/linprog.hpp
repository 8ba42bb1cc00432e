#pragma once

#include <limits>
#include <string>
#include <vector>

namespace riskmdp::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse LP:   minimize  objective . x
///              subject to row_lower <= A x <= row_upper
///                         var_lower <= x <= var_upper
struct Problem {
    std::vector<double> objective;
    std::vector<double> var_lower;
    std::vector<double> var_upper;

    struct Row {
        std::vector<int> index;
        std::vector<double> value;
        double lower = -kInf;
        double upper = kInf;
    };
    std::vector<Row> rows;

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    int add_variable(double cost, double lower, double upper);
    void add_row(std::vector<int> index, std::vector<double> value, double lower, double upper);
    void add_le_row(std::vector<int> index, std::vector<double> value, double upper);
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

std::string to_string(Status status);

struct Solution {
    Status status = Status::NumericalFailure;
    double objective = 0.0;
    std::vector<double> x;
    std::vector<double> row_duals;     // y_i: >= 0 when the row's lower bound binds,
                                       // <= 0 when the upper bound binds (min problem)
    std::vector<double> reduced_costs; // c_j - y . A_j
    std::vector<double> ray;           // improving direction when Unbounded
    double infeasibility = 0.0;        // phase-1 residual when Infeasible

    // certified residuals, filled on Optimal
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
};

struct SolveOptions {
    int max_iterations = 0; // 0: automatic from problem size
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
};

/// Dense revised simplex over bounded variables, two-phase, with Bland's
/// rule engaged after a degenerate stall. Optimal results are self-checked
/// (feasibility, complementary slackness, duality gap).
Solution solve(const Problem& problem, const SolveOptions& options = {});

/// Chooses between the direct path and a dualized solve. Problems with many
/// more rows than variables, only upper-bounded rows, and no finite variable
/// upper bounds are solved through their dual, which keeps the simplex basis
/// small. Results are mapped back to the original problem and re-verified.
Solution solve_auto(const Problem& problem, const SolveOptions& options = {});

} // namespace riskmdp::lp
