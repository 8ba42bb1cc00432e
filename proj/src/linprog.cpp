#include "riskmdp/linprog.hpp"
#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace riskmdp::lp {

int Problem::add_variable(double cost, double lower, double upper) {
    objective.push_back(cost);
    var_lower.push_back(lower);
    var_upper.push_back(upper);
    return static_cast<int>(objective.size()) - 1;
}

void Problem::add_row(std::vector<int> index, std::vector<double> value, double lower,
                      double upper) {
    Row row;
    row.index = std::move(index);
    row.value = std::move(value);
    row.lower = lower;
    row.upper = upper;
    rows.push_back(std::move(row));
}

void Problem::add_le_row(std::vector<int> index, std::vector<double> value, double upper) {
    add_row(std::move(index), std::move(value), -kInf, upper);
}

std::string to_string(Status status) {
    switch (status) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
        case Status::IterationLimit: return "iteration_limit";
        case Status::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

namespace {

constexpr double kPivotTol = 1e-9;

// Revised simplex over bounded variables with an explicit dense basis
// inverse. Column space: structural variables [0, n), row activity
// variables [n, n + m) via A x - r = 0, then phase-1 artificials.
class Simplex {
  public:
    Simplex(const Problem& problem, const SolveOptions& options)
        : p_(problem), opts_(options), n_(problem.num_vars()), m_(problem.num_rows()) {
        if (opts_.max_iterations <= 0) opts_.max_iterations = 200 * (n_ + m_) + 2000;
        build_columns();
    }

    Solution run();

  private:
    enum class Step { Moved, PhaseDone, Unbounded, Failure };
    enum class At { Lower, Upper, Free, Basic };

    const Problem& p_;
    SolveOptions opts_;
    int n_ = 0;
    int m_ = 0;
    int total_ = 0;

    std::vector<std::vector<int>> col_index_;
    std::vector<std::vector<double>> col_value_;
    std::vector<double> lower_, upper_, cost_;

    std::vector<int> basis_;
    std::vector<int> position_; // column -> basis row or -1
    std::vector<At> location_;
    std::vector<double> value_;
    std::vector<double> binv_;
    std::vector<double> y_;
    std::vector<double> d_;
    bool phase_one_ = false;
    int iterations_ = 0;
    int degenerate_streak_ = 0;
    bool bland_ = false;
    int num_artificials_ = 0;
    std::vector<double> ray_;

    double binv(int i, int j) const { return binv_[static_cast<std::size_t>(i) * m_ + j]; }
    double& binv(int i, int j) { return binv_[static_cast<std::size_t>(i) * m_ + j]; }

    void build_columns();
    void crash_basis();
    std::vector<double> ftran(int col) const;
    void refresh_pricing();
    bool refactorize();
    void recompute_basic_values();
    double phase_cost(int col) const {
        if (phase_one_) return col >= n_ + m_ ? 1.0 : 0.0;
        return col < static_cast<int>(cost_.size()) ? cost_[col] : 0.0;
    }
    int choose_entering() const;
    Step iterate();
    double artificial_infeasibility() const;
    Solution finish(Status status);
    void fill_checks(Solution& out) const;
};

void Simplex::build_columns() {
    total_ = n_ + m_;
    col_index_.resize(total_);
    col_value_.resize(total_);
    lower_.resize(total_);
    upper_.resize(total_);
    cost_.assign(total_, 0.0);

    for (int j = 0; j < n_; ++j) {
        lower_[j] = p_.var_lower[j];
        upper_[j] = p_.var_upper[j];
        cost_[j] = p_.objective[j];
        if (lower_[j] > upper_[j] + 1e-12)
            throw std::invalid_argument("lp: variable with empty bound interval");
    }
    for (int i = 0; i < m_; ++i) {
        const auto& row = p_.rows[i];
        for (std::size_t k = 0; k < row.index.size(); ++k) {
            int j = row.index[k];
            if (j < 0 || j >= n_) throw std::invalid_argument("lp: row index out of range");
            if (row.value[k] == 0.0) continue;
            col_index_[j].push_back(i);
            col_value_[j].push_back(row.value[k]);
        }
        int rc = n_ + i;
        col_index_[rc] = {i};
        col_value_[rc] = {-1.0};
        lower_[rc] = row.lower;
        upper_[rc] = row.upper;
        if (row.lower > row.upper + 1e-12)
            throw std::invalid_argument("lp: row with empty bound interval");
    }
}

void Simplex::crash_basis() {
    location_.assign(total_, At::Lower);
    value_.assign(total_, 0.0);
    for (int j = 0; j < total_; ++j) {
        if (std::isfinite(lower_[j]) && std::isfinite(upper_[j])) {
            bool lo = std::fabs(lower_[j]) <= std::fabs(upper_[j]);
            location_[j] = lo ? At::Lower : At::Upper;
            value_[j] = lo ? lower_[j] : upper_[j];
        } else if (std::isfinite(lower_[j])) {
            location_[j] = At::Lower;
            value_[j] = lower_[j];
        } else if (std::isfinite(upper_[j])) {
            location_[j] = At::Upper;
            value_[j] = upper_[j];
        } else {
            location_[j] = At::Free;
            value_[j] = 0.0;
        }
    }

    std::vector<double> activity(m_, 0.0);
    for (int j = 0; j < n_; ++j) {
        if (value_[j] == 0.0) continue;
        for (std::size_t k = 0; k < col_index_[j].size(); ++k)
            activity[col_index_[j][k]] += col_value_[j][k] * value_[j];
    }

    basis_.assign(m_, -1);
    position_.assign(total_, -1);
    num_artificials_ = 0;
    for (int i = 0; i < m_; ++i) {
        int rc = n_ + i;
        double t = activity[i];
        if (t >= lower_[rc] - opts_.feas_tol && t <= upper_[rc] + opts_.feas_tol) {
            basis_[i] = rc;
            location_[rc] = At::Basic;
            value_[rc] = t;
        } else {
            double bound = (t < lower_[rc]) ? lower_[rc] : upper_[rc];
            location_[rc] = (t < lower_[rc]) ? At::Lower : At::Upper;
            value_[rc] = bound;
            double residual = t - bound;
            int art = total_;
            col_index_.push_back({i});
            // row reads A x - r + coef * art = 0, so coef = -sign(residual)
            col_value_.push_back({residual >= 0.0 ? -1.0 : 1.0});
            lower_.push_back(0.0);
            upper_.push_back(kInf);
            cost_.push_back(0.0);
            location_.push_back(At::Basic);
            value_.push_back(std::fabs(residual));
            position_.push_back(-1);
            basis_[i] = art;
            ++total_;
            ++num_artificials_;
        }
    }
    for (int i = 0; i < m_; ++i) position_[basis_[i]] = i;

    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv(i, i) = 1.0 / col_value_[basis_[i]][0];
}

std::vector<double> Simplex::ftran(int col) const {
    std::vector<double> w(m_, 0.0);
    for (std::size_t k = 0; k < col_index_[col].size(); ++k) {
        int i = col_index_[col][k];
        double a = col_value_[col][k];
        for (int r = 0; r < m_; ++r) w[r] += binv(r, i) * a;
    }
    return w;
}

void Simplex::refresh_pricing() {
    y_.assign(m_, 0.0);
    for (int r = 0; r < m_; ++r) {
        double cb = phase_cost(basis_[r]);
        if (cb == 0.0) continue;
        for (int i = 0; i < m_; ++i) y_[i] += cb * binv(r, i);
    }
    d_.assign(total_, 0.0);
    for (int j = 0; j < total_; ++j) {
        if (position_[j] >= 0) continue;
        double dj = phase_cost(j);
        for (std::size_t k = 0; k < col_index_[j].size(); ++k)
            dj -= y_[col_index_[j][k]] * col_value_[j][k];
        d_[j] = dj;
    }
}

bool Simplex::refactorize() {
    std::vector<double> mat(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int c = 0; c < m_; ++c) {
        int col = basis_[c];
        for (std::size_t k = 0; k < col_index_[col].size(); ++k)
            mat[static_cast<std::size_t>(col_index_[col][k]) * m_ + c] = col_value_[col][k];
    }
    std::vector<double> inv(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) inv[static_cast<std::size_t>(i) * m_ + i] = 1.0;

    for (int c = 0; c < m_; ++c) {
        int piv = -1;
        double best = 1e-12;
        for (int r = c; r < m_; ++r) {
            double a = std::fabs(mat[static_cast<std::size_t>(r) * m_ + c]);
            if (a > best) {
                best = a;
                piv = r;
            }
        }
        if (piv < 0) return false;
        if (piv != c) {
            for (int k = 0; k < m_; ++k) {
                std::swap(mat[static_cast<std::size_t>(piv) * m_ + k],
                          mat[static_cast<std::size_t>(c) * m_ + k]);
                std::swap(inv[static_cast<std::size_t>(piv) * m_ + k],
                          inv[static_cast<std::size_t>(c) * m_ + k]);
            }
        }
        double pivot = mat[static_cast<std::size_t>(c) * m_ + c];
        for (int k = 0; k < m_; ++k) {
            mat[static_cast<std::size_t>(c) * m_ + k] /= pivot;
            inv[static_cast<std::size_t>(c) * m_ + k] /= pivot;
        }
        for (int r = 0; r < m_; ++r) {
            if (r == c) continue;
            double f = mat[static_cast<std::size_t>(r) * m_ + c];
            if (f == 0.0) continue;
            for (int k = 0; k < m_; ++k) {
                mat[static_cast<std::size_t>(r) * m_ + k] -= f * mat[static_cast<std::size_t>(c) * m_ + k];
                inv[static_cast<std::size_t>(r) * m_ + k] -= f * inv[static_cast<std::size_t>(c) * m_ + k];
            }
        }
    }
    binv_ = std::move(inv);
    return true;
}

void Simplex::recompute_basic_values() {
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < total_; ++j) {
        if (position_[j] >= 0 || value_[j] == 0.0) continue;
        for (std::size_t k = 0; k < col_index_[j].size(); ++k)
            rhs[col_index_[j][k]] -= col_value_[j][k] * value_[j];
    }
    for (int r = 0; r < m_; ++r) {
        double v = 0.0;
        for (int i = 0; i < m_; ++i) v += binv(r, i) * rhs[i];
        value_[basis_[r]] = v;
    }
}

int Simplex::choose_entering() const {
    int best = -1;
    double best_score = opts_.opt_tol;
    for (int j = 0; j < total_; ++j) {
        if (position_[j] >= 0) continue;
        if (j >= n_ + m_) continue; // artificials never (re-)enter
        if (lower_[j] == upper_[j]) continue;
        double dj = d_[j];
        double score = 0.0;
        if (location_[j] == At::Lower && dj < -opts_.opt_tol) score = -dj;
        else if (location_[j] == At::Upper && dj > opts_.opt_tol) score = dj;
        else if (location_[j] == At::Free && std::fabs(dj) > opts_.opt_tol) score = std::fabs(dj);
        if (score <= 0.0) continue;
        if (bland_) return j; // first eligible index
        if (score > best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

Simplex::Step Simplex::iterate() {
    int entering = choose_entering();
    if (entering < 0) return Step::PhaseDone;

    double dj = d_[entering];
    double dir = 1.0;
    if (location_[entering] == At::Upper) dir = -1.0;
    else if (location_[entering] == At::Free) dir = dj < 0.0 ? 1.0 : -1.0;

    std::vector<double> w = ftran(entering);

    double limit = kInf;
    int leaving_row = -1;
    double leaving_bound = 0.0;
    double best_pivot = 0.0;
    for (int r = 0; r < m_; ++r) {
        double delta = -dir * w[r];
        if (std::fabs(delta) <= kPivotTol) continue;
        int col = basis_[r];
        double room, bound;
        if (delta < 0.0) {
            if (!std::isfinite(lower_[col])) continue;
            room = (value_[col] - lower_[col]) / (-delta);
            bound = lower_[col];
        } else {
            if (!std::isfinite(upper_[col])) continue;
            room = (upper_[col] - value_[col]) / delta;
            bound = upper_[col];
        }
        room = std::max(room, 0.0);
        bool better = false;
        if (room < limit - 1e-12) {
            better = true;
        } else if (room <= limit + 1e-12 && leaving_row >= 0) {
            if (bland_)
                better = basis_[r] < basis_[leaving_row];
            else
                better = std::fabs(w[r]) > best_pivot;
        } else if (leaving_row < 0 && room < limit) {
            better = true;
        }
        if (better) {
            limit = std::min(limit, room);
            leaving_row = r;
            leaving_bound = bound;
            best_pivot = std::fabs(w[r]);
        }
    }
    double span = upper_[entering] - lower_[entering];
    bool bound_flip = false;
    if (std::isfinite(span) && span < limit) {
        limit = span;
        bound_flip = true;
    }

    if (!std::isfinite(limit)) {
        ray_.assign(n_, 0.0);
        if (entering < n_) ray_[entering] = dir;
        for (int r = 0; r < m_; ++r) {
            int col = basis_[r];
            if (col < n_ && std::fabs(w[r]) > kPivotTol) ray_[col] = -dir * w[r];
        }
        return Step::Unbounded;
    }

    ++iterations_;
    if (limit <= 1e-11) {
        if (++degenerate_streak_ > 2 * (m_ + n_) + 64) bland_ = true;
    } else {
        degenerate_streak_ = 0;
        bland_ = false;
    }

    value_[entering] += dir * limit;
    for (int r = 0; r < m_; ++r) {
        if (w[r] == 0.0) continue;
        value_[basis_[r]] -= dir * limit * w[r];
    }

    if (bound_flip) {
        location_[entering] = dir > 0.0 ? At::Upper : At::Lower;
        value_[entering] = dir > 0.0 ? upper_[entering] : lower_[entering];
        return Step::Moved; // basis unchanged, pricing still valid
    }

    int leaving = basis_[leaving_row];
    value_[leaving] = leaving_bound;
    location_[leaving] =
        (std::isfinite(lower_[leaving]) && leaving_bound == lower_[leaving]) ? At::Lower : At::Upper;
    position_[leaving] = -1;
    basis_[leaving_row] = entering;
    position_[entering] = leaving_row;
    location_[entering] = At::Basic;

    double pivot = w[leaving_row];
    if (std::fabs(pivot) < kPivotTol) return Step::Failure;
    for (int k = 0; k < m_; ++k) binv(leaving_row, k) /= pivot;
    for (int r = 0; r < m_; ++r) {
        if (r == leaving_row) continue;
        double f = w[r];
        if (f == 0.0) continue;
        for (int k = 0; k < m_; ++k) binv(r, k) -= f * binv(leaving_row, k);
    }

    if (iterations_ % 128 == 0) {
        if (!refactorize()) return Step::Failure;
        recompute_basic_values();
    }
    refresh_pricing();
    return Step::Moved;
}

double Simplex::artificial_infeasibility() const {
    double total = 0.0;
    for (int j = n_ + m_; j < total_; ++j) total += std::fabs(value_[j]);
    return total;
}

Solution Simplex::run() {
    crash_basis();

    if (num_artificials_ > 0) {
        phase_one_ = true;
        refresh_pricing();
        while (iterations_ < opts_.max_iterations) {
            if (artificial_infeasibility() <= opts_.feas_tol) break;
            Step step = iterate();
            if (step == Step::PhaseDone) break;
            if (step == Step::Unbounded || step == Step::Failure)
                return finish(Status::NumericalFailure);
        }
        if (iterations_ >= opts_.max_iterations) return finish(Status::IterationLimit);
        if (!refactorize()) return finish(Status::NumericalFailure);
        recompute_basic_values();
        double infeas = artificial_infeasibility();
        if (infeas > std::max(1e-7, opts_.feas_tol)) {
            Solution out = finish(Status::Infeasible);
            out.infeasibility = infeas;
            return out;
        }
        for (int j = n_ + m_; j < total_; ++j) {
            lower_[j] = 0.0;
            upper_[j] = 0.0;
            if (position_[j] < 0) {
                location_[j] = At::Lower;
                value_[j] = 0.0;
            }
        }
        phase_one_ = false;
    }

    refresh_pricing();
    while (iterations_ < opts_.max_iterations) {
        Step step = iterate();
        if (step == Step::PhaseDone) return finish(Status::Optimal);
        if (step == Step::Unbounded) return finish(Status::Unbounded);
        if (step == Step::Failure) return finish(Status::NumericalFailure);
    }
    return finish(Status::IterationLimit);
}

Solution Simplex::finish(Status status) {
    Solution out;
    out.status = status;
    out.iterations = iterations_;
    if (status == Status::Optimal) {
        if (refactorize()) {
            recompute_basic_values();
            refresh_pricing();
        } else {
            out.status = Status::NumericalFailure;
        }
    }
    out.x.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) out.x[j] = value_[j];
    out.row_duals.assign(m_, 0.0);
    if (!y_.empty())
        for (int i = 0; i < m_; ++i) out.row_duals[i] = y_[i];
    out.reduced_costs.assign(n_, 0.0);
    if (!d_.empty())
        for (int j = 0; j < n_; ++j) out.reduced_costs[j] = d_[j];
    if (status == Status::Unbounded) out.ray = ray_;
    out.objective = 0.0;
    for (int j = 0; j < n_; ++j) out.objective += p_.objective[j] * out.x[j];
    if (out.status == Status::Optimal) fill_checks(out);
    return out;
}

void Simplex::fill_checks(Solution& out) const {
    double primal = 0.0, dual = 0.0, comp = 0.0;
    for (int j = 0; j < n_; ++j) {
        double v = out.x[j];
        if (std::isfinite(p_.var_lower[j])) primal = std::max(primal, p_.var_lower[j] - v);
        if (std::isfinite(p_.var_upper[j])) primal = std::max(primal, v - p_.var_upper[j]);
        double dj = out.reduced_costs[j];
        if (position_[j] >= 0) {
            dual = std::max(dual, std::fabs(dj));
            continue;
        }
        double lo_slack = std::isfinite(p_.var_lower[j]) ? v - p_.var_lower[j] : kInf;
        double up_slack = std::isfinite(p_.var_upper[j]) ? p_.var_upper[j] - v : kInf;
        if (!std::isfinite(lo_slack) && !std::isfinite(up_slack)) {
            dual = std::max(dual, std::fabs(dj)); // free nonbasic must be stationary
        } else if (lo_slack <= up_slack) {
            dual = std::max(dual, -dj);
            comp = std::max(comp, std::fabs(dj) * std::min(lo_slack, 1.0));
        } else {
            dual = std::max(dual, dj);
            comp = std::max(comp, std::fabs(dj) * std::min(up_slack, 1.0));
        }
    }
    double dual_obj = 0.0;
    for (int i = 0; i < m_; ++i) {
        const auto& row = p_.rows[i];
        double activity = 0.0;
        for (std::size_t k = 0; k < row.index.size(); ++k)
            activity += row.value[k] * out.x[row.index[k]];
        if (std::isfinite(row.lower)) primal = std::max(primal, row.lower - activity);
        if (std::isfinite(row.upper)) primal = std::max(primal, activity - row.upper);
        double y = out.row_duals[i];
        double lo_slack = std::isfinite(row.lower) ? activity - row.lower : kInf;
        double up_slack = std::isfinite(row.upper) ? row.upper - activity : kInf;
        double interior = std::min(lo_slack, up_slack);
        if (std::isfinite(interior)) comp = std::max(comp, std::fabs(y) * std::min(interior, 1.0));
        if (y > 0.0 && !std::isfinite(row.lower)) dual = std::max(dual, y);
        if (y < 0.0 && !std::isfinite(row.upper)) dual = std::max(dual, -y);
        dual_obj += y * activity;
    }
    for (int j = 0; j < n_; ++j) dual_obj += out.reduced_costs[j] * out.x[j];
    out.primal_residual = primal;
    out.dual_residual = dual;
    out.complementarity = comp;
    out.duality_gap = std::fabs(out.objective - dual_obj);
}

} // namespace

Solution solve(const Problem& problem, const SolveOptions& options) {
    if (problem.num_rows() == 0) {
        Solution out;
        out.status = Status::Optimal;
        out.x.resize(problem.num_vars());
        out.reduced_costs = problem.objective;
        for (int j = 0; j < problem.num_vars(); ++j) {
            double c = problem.objective[j];
            double lo = problem.var_lower[j], up = problem.var_upper[j];
            if (c > 0.0) {
                if (!std::isfinite(lo)) {
                    out.status = Status::Unbounded;
                    out.ray.assign(problem.num_vars(), 0.0);
                    out.ray[j] = -1.0;
                    return out;
                }
                out.x[j] = lo;
            } else if (c < 0.0) {
                if (!std::isfinite(up)) {
                    out.status = Status::Unbounded;
                    out.ray.assign(problem.num_vars(), 0.0);
                    out.ray[j] = 1.0;
                    return out;
                }
                out.x[j] = up;
            } else {
                out.x[j] = std::isfinite(lo) ? lo : (std::isfinite(up) ? up : 0.0);
            }
            out.objective += c * out.x[j];
        }
        return out;
    }
    Simplex simplex(problem, options);
    return simplex.run();
}

namespace {

// Dual construction for row-heavy problems: rows must be upper-bounded only,
// variables free, lower-bounded, or fixed. Fixed variables are substituted
// into the right-hand sides; lower-bounded singleton columns with
// non-negative cost become bounds on the dual variable. Everything else
// turns into one dual row per primal variable.
struct DualMap {
    bool applicable = false;
    int effective_vars = 0; // dual rows the construction would need
    Problem dual;
    // per primal variable: >= 0 row id of its compacted singleton column,
    // -1 untracked (sits at its bound), <= -2 encodes dual row (-2 - row)
    std::vector<int> tag;
    std::vector<double> singleton_coef;
    std::vector<double> shift;
    double objective_offset = 0.0;
};

DualMap build_dual(const Problem& p, bool shape_check_only) {
    DualMap map;
    const int n = p.num_vars();
    const int m = p.num_rows();
    for (const auto& row : p.rows)
        if (std::isfinite(row.lower) || !std::isfinite(row.upper)) return map;

    std::vector<bool> fixed(n, false);
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(p.var_upper[j])) {
            if (p.var_upper[j] - p.var_lower[j] <= 1e-14)
                fixed[j] = true; // substituted out below
            else
                return map;
        }
    }

    map.shift.assign(n, 0.0);
    for (int j = 0; j < n; ++j)
        if (std::isfinite(p.var_lower[j])) map.shift[j] = p.var_lower[j];

    std::vector<int> col_count(n, 0), col_row(n, -1);
    std::vector<double> col_coef(n, 0.0);
    for (int i = 0; i < m; ++i) {
        const auto& row = p.rows[i];
        for (std::size_t k = 0; k < row.index.size(); ++k) {
            int j = row.index[k];
            if (row.value[k] == 0.0 || fixed[j]) continue;
            ++col_count[j];
            col_row[j] = i;
            col_coef[j] = row.value[k];
        }
    }

    std::set<int> compacted_rows;
    for (int j = 0; j < n; ++j) {
        if (fixed[j]) continue;
        bool bounded = std::isfinite(p.var_lower[j]);
        double c = p.objective[j];
        if (col_count[j] == 0) {
            if ((bounded && c < 0.0) || (!bounded && c != 0.0)) return map; // unbounded
            continue;
        }
        if (bounded && col_count[j] == 1 && c >= 0.0 && !compacted_rows.count(col_row[j])) {
            compacted_rows.insert(col_row[j]);
            continue;
        }
        ++map.effective_vars;
    }
    map.applicable = true;
    if (shape_check_only) return map;

    compacted_rows.clear();
    std::vector<std::vector<int>> var_rows(n);
    std::vector<std::vector<double>> var_vals(n);
    for (int i = 0; i < m; ++i) {
        const auto& row = p.rows[i];
        for (std::size_t k = 0; k < row.index.size(); ++k) {
            int j = row.index[k];
            if (row.value[k] == 0.0 || fixed[j]) continue;
            var_rows[j].push_back(i);
            var_vals[j].push_back(row.value[k]);
        }
    }

    for (int i = 0; i < m; ++i) {
        const auto& row = p.rows[i];
        double b = row.upper;
        for (std::size_t k = 0; k < row.index.size(); ++k)
            b -= row.value[k] * map.shift[row.index[k]];
        map.dual.add_variable(-b, -kInf, 0.0);
    }

    map.tag.assign(n, -1);
    map.singleton_coef.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
        if (fixed[j] || col_count[j] == 0) continue;
        bool bounded = std::isfinite(p.var_lower[j]);
        double c = p.objective[j];
        if (bounded && col_count[j] == 1 && c >= 0.0 && !compacted_rows.count(col_row[j])) {
            map.tag[j] = col_row[j];
            map.singleton_coef[j] = col_coef[j];
            compacted_rows.insert(col_row[j]);
            double a = col_coef[j];
            if (a > 0.0)
                map.dual.var_upper[col_row[j]] = std::min(map.dual.var_upper[col_row[j]], c / a);
            else
                map.dual.var_lower[col_row[j]] = std::max(map.dual.var_lower[col_row[j]], c / a);
            if (map.dual.var_lower[col_row[j]] > map.dual.var_upper[col_row[j]] + 1e-12) {
                map.applicable = false;
                return map;
            }
            continue;
        }
        if (bounded)
            map.dual.add_row(var_rows[j], var_vals[j], -kInf, c);
        else
            map.dual.add_row(var_rows[j], var_vals[j], c, c);
        map.tag[j] = -2 - (map.dual.num_rows() - 1);
    }
    for (int j = 0; j < n; ++j) map.objective_offset += p.objective[j] * map.shift[j];
    return map;
}

} // namespace

Solution solve_auto(const Problem& problem, const SolveOptions& options) {
    const int n = problem.num_vars();
    const int m = problem.num_rows();
    if (m <= 48) return solve(problem, options);

    // effective variables = dual rows after fixed-variable substitution and
    // singleton compaction; the dual pays off when rows dominate them
    DualMap shape = build_dual(problem, true);
    if (!shape.applicable || m <= 2 * shape.effective_vars + 16)
        return solve(problem, options);

    DualMap map = build_dual(problem, false);
    if (!map.applicable) return solve(problem, options);

    Solution dual_solution = solve(map.dual, options);
    if (std::getenv("RISKMDP_LP_DEBUG"))
        std::fprintf(stderr, "lp dual route: m=%d eff=%d dual status=%s iters=%d\n", m,
                     shape.effective_vars, to_string(dual_solution.status).c_str(),
                     dual_solution.iterations);
    if (dual_solution.status == Status::Unbounded) {
        Solution out;
        out.status = Status::Infeasible;
        return out;
    }
    if (dual_solution.status != Status::Optimal) return solve(problem, options);

    Solution out;
    out.status = Status::Optimal;
    out.iterations = dual_solution.iterations;
    out.row_duals.assign(m, 0.0);
    for (int i = 0; i < m; ++i) out.row_duals[i] = dual_solution.x[i];
    out.x.assign(n, 0.0);

    for (int j = 0; j < n; ++j) {
        int tag = map.tag[j];
        if (tag <= -2) {
            // shadow price of the dual row's cost bound is -x_j
            int dual_row = -2 - tag;
            out.x[j] = map.shift[j] - dual_solution.row_duals[dual_row];
        } else if (tag == -1) {
            out.x[j] = std::isfinite(problem.var_lower[j]) ? problem.var_lower[j] : 0.0;
        }
    }
    for (int j = 0; j < n; ++j) {
        int tag = map.tag[j];
        if (tag < 0) continue;
        const auto& row = problem.rows[tag];
        double activity_others = 0.0;
        for (std::size_t k = 0; k < row.index.size(); ++k)
            if (row.index[k] != j) activity_others += row.value[k] * out.x[row.index[k]];
        double a = map.singleton_coef[j];
        double forced = (row.upper - activity_others) / a;
        double lo = problem.var_lower[j];
        out.x[j] = (a < 0.0) ? std::max(lo, forced) : lo;
    }

    out.objective = 0.0;
    for (int j = 0; j < n; ++j) out.objective += problem.objective[j] * out.x[j];
    out.reduced_costs = problem.objective;
    for (int i = 0; i < m; ++i) {
        const auto& row = problem.rows[i];
        double y = out.row_duals[i];
        if (y == 0.0) continue;
        for (std::size_t k = 0; k < row.index.size(); ++k)
            out.reduced_costs[row.index[k]] -= y * row.value[k];
    }

    double primal = 0.0, comp = 0.0;
    for (int i = 0; i < m; ++i) {
        const auto& row = problem.rows[i];
        double activity = 0.0;
        for (std::size_t k = 0; k < row.index.size(); ++k)
            activity += row.value[k] * out.x[row.index[k]];
        primal = std::max(primal, activity - row.upper);
        double slack = std::max(0.0, row.upper - activity);
        comp = std::max(comp, std::fabs(out.row_duals[i]) * std::min(slack, 1.0));
    }
    for (int j = 0; j < n; ++j)
        if (std::isfinite(problem.var_lower[j]))
            primal = std::max(primal, problem.var_lower[j] - out.x[j]);
    out.primal_residual = primal;
    out.complementarity = comp;
    out.duality_gap =
        std::fabs(out.objective - (-dual_solution.objective + map.objective_offset));
    out.dual_residual = dual_solution.primal_residual;
    if (primal > 1e-6 || out.duality_gap > 1e-5 * (1.0 + std::fabs(out.objective))) {
        if (std::getenv("RISKMDP_LP_DEBUG"))
            std::fprintf(stderr, "lp dual route rejected: primal=%g gap=%g obj=%g\n", primal,
                         out.duality_gap, out.objective);
        return solve(problem, options); // mapping drifted; take the direct path
    }
    return out;
}

} // namespace riskmdp::lp
