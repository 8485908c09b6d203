#include "cope/lp.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cope::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-7;   // minimum pivot magnitude (scaled data)
constexpr int kRefactorEvery = 40;   // pivots between refactorizations

enum class VarState { at_lower, at_upper, basic };

// Full-tableau simplex over the shifted, equilibrated standard form
//   min c^T y   s.t.  T y = rhs,  0 <= y <= range.
// The tableau B^{-1}A and the reduced costs are maintained incrementally
// and refactorized from the original matrix every few dozen pivots, which
// keeps drift from small pivots bounded. Pricing is Dantzig (most negative
// reduced cost, lowest index on ties) with a permanent switch to Bland's
// rule after a run of degenerate pivots. Fully deterministic.
class Tableau {
public:
    Tableau(Eigen::MatrixXd a0, Eigen::VectorXd b0, std::vector<int> basis,
            Eigen::VectorXd range, double tol)
        : a0_(std::move(a0)),
          b0_(std::move(b0)),
          basis_(std::move(basis)),
          range_(std::move(range)),
          tol_(tol),
          m_(static_cast<int>(a0_.rows())),
          n_(static_cast<int>(a0_.cols())),
          state_(n_, VarState::at_lower),
          blocked_(n_, false) {
        for (int i = 0; i < m_; ++i) state_[basis_[i]] = VarState::basic;
        refactor();
    }

    Status run(const Eigen::VectorXd& c, int max_iters, int& iters) {
        cost_ = c;
        refresh_reduced();
        bland_ = false;
        degenerate_run_ = 0;
        while (true) {
            if (iters++ > max_iters) return Status::iteration_limit;
            const int enter = pick_entering();
            if (enter < 0) return Status::optimal;
            if (!advance(enter)) return Status::unbounded;
            if (++pivots_since_refactor_ >= kRefactorEvery) {
                refactor();
                refresh_reduced();
            }
        }
    }

    // Pivots basic artificial variables out where possible and freezes the
    // rest at zero (redundant rows), so phase 2 never moves them.
    void retire_artificials(int first_artificial) {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < first_artificial) continue;
            int enter = -1;
            for (int j = 0; j < first_artificial; ++j) {
                if (state_[j] == VarState::basic) continue;
                if (std::abs(t_(i, j)) > 1e-7) {
                    enter = j;
                    break;
                }
            }
            if (enter >= 0) {
                const int leave = basis_[i];
                state_[leave] = VarState::at_lower;
                state_[enter] = VarState::basic;
                basis_[i] = enter;
                xb_[i] = 0.0;  // leaving artificial held ~0 after phase 1
                pivot(i, enter);
            } else {
                range_[basis_[i]] = 0.0;  // redundant row; artificial pinned
            }
        }
        for (int j = first_artificial; j < n_; ++j) blocked_[j] = true;
    }

    void refactor() {
        Eigen::MatrixXd b(m_, m_);
        for (int i = 0; i < m_; ++i) b.col(i) = a0_.col(basis_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
        t_ = lu.solve(a0_);
        Eigen::VectorXd rhs = b0_;
        for (int j = 0; j < n_; ++j)
            if (state_[j] == VarState::at_upper && range_[j] < kInf)
                rhs -= range_[j] * a0_.col(j);
        xb_ = lu.solve(rhs);
        pivots_since_refactor_ = 0;
    }

    const std::vector<int>& basis() const { return basis_; }
    const Eigen::VectorXd& basic_values() const { return xb_; }
    VarState state(int j) const { return state_[j]; }

private:
    void refresh_reduced() {
        reduced_ = cost_;
        for (int i = 0; i < m_; ++i)
            if (std::abs(cost_[basis_[i]]) > 0.0)
                reduced_ -= cost_[basis_[i]] * t_.row(i).transpose();
    }

    bool improving(int j) const {
        if (blocked_[j] || state_[j] == VarState::basic) return false;
        const double d = reduced_[j];
        if (state_[j] == VarState::at_lower && d < -tol_) return true;
        if (state_[j] == VarState::at_upper && d > tol_ && range_[j] < kInf) return true;
        return false;
    }

    int pick_entering() const {
        if (bland_) {
            for (int j = 0; j < n_; ++j)
                if (improving(j)) return j;
            return -1;
        }
        int best = -1;
        double best_score = tol_;
        for (int j = 0; j < n_; ++j) {
            if (!improving(j)) continue;
            const double score = std::abs(reduced_[j]);
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        return best;
    }

    bool advance(int enter) {
        const double sigma = state_[enter] == VarState::at_lower ? 1.0 : -1.0;
        double best_t = range_[enter];
        int leave_row = -1;
        bool leave_at_upper = false;
        for (int i = 0; i < m_; ++i) {
            const double alpha = sigma * t_(i, enter);
            double limit = kInf;
            bool hits_upper = false;
            if (alpha > kPivotTol) {
                limit = std::max(xb_[i], 0.0) / alpha;
            } else if (alpha < -kPivotTol && range_[basis_[i]] < kInf) {
                limit = std::max(range_[basis_[i]] - xb_[i], 0.0) / (-alpha);
                hits_upper = true;
            } else {
                continue;
            }
            if (limit < best_t - tol_ ||
                (limit < best_t + tol_ && leave_row >= 0 && basis_[i] < basis_[leave_row])) {
                best_t = std::max(std::min(limit, best_t), 0.0);
                leave_row = i;
                leave_at_upper = hits_upper;
            }
        }
        if (leave_row < 0 && !(best_t < kInf)) return false;

        if (leave_row < 0) {
            // bound flip: entering traverses its whole range
            xb_ -= sigma * range_[enter] * t_.col(enter);
            state_[enter] =
                state_[enter] == VarState::at_lower ? VarState::at_upper : VarState::at_lower;
            degenerate_run_ = 0;
            return true;
        }

        const double step = best_t;
        if (step <= tol_) {
            if (++degenerate_run_ > 2 * (m_ + n_)) bland_ = true;  // anti-cycling
        } else {
            degenerate_run_ = 0;
        }

        const double enter_value =
            state_[enter] == VarState::at_lower ? step : range_[enter] - step;
        xb_ -= sigma * step * t_.col(enter);

        const int leave = basis_[leave_row];
        state_[leave] = leave_at_upper ? VarState::at_upper : VarState::at_lower;
        state_[enter] = VarState::basic;
        basis_[leave_row] = enter;
        xb_[leave_row] = enter_value;

        pivot(leave_row, enter);
        return true;
    }

    void pivot(int r, int enter) {
        const double piv = t_(r, enter);
        assert(std::abs(piv) > 0.0);
        t_.row(r) /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = t_(i, enter);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        const double d = reduced_[enter];
        if (d != 0.0) reduced_ -= d * t_.row(r).transpose();
    }

    Eigen::MatrixXd a0_;  // original (scaled) matrix incl. artificials
    Eigen::VectorXd b0_;
    Eigen::MatrixXd t_;
    Eigen::VectorXd xb_;
    std::vector<int> basis_;
    Eigen::VectorXd range_;
    Eigen::VectorXd reduced_;
    Eigen::VectorXd cost_;
    double tol_;
    int m_, n_;
    std::vector<VarState> state_;
    std::vector<bool> blocked_;
    bool bland_ = false;
    int degenerate_run_ = 0;
    int pivots_since_refactor_ = 0;
};

}  // namespace

std::string to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

Solution solve(const Problem& problem, double tol, int max_iterations) {
    const int n_struct = problem.n_vars();
    const int m_eq = static_cast<int>(problem.a_eq.rows());
    const int m_ub = static_cast<int>(problem.a_ub.rows());
    const int m = m_eq + m_ub;
    const int n_slack = m_ub;
    const int n = n_struct + n_slack;

    if (problem.a_eq.cols() != n_struct || problem.a_ub.cols() != n_struct ||
        problem.b_eq.size() != m_eq || problem.b_ub.size() != m_ub ||
        problem.lower.size() != n_struct || problem.upper.size() != n_struct) {
        throw std::invalid_argument("lp::solve: inconsistent problem dimensions");
    }
    for (int j = 0; j < n_struct; ++j) {
        if (!std::isfinite(problem.lower[j]))
            throw std::invalid_argument("lp::solve: lower bounds must be finite");
        if (problem.upper[j] < problem.lower[j] - tol) {
            Solution out;
            out.status = Status::infeasible;
            out.infeasibility = problem.lower[j] - problem.upper[j];
            return out;
        }
    }

    // shifted system (y = x - lower) with slack variables for the <= rows
    Eigen::MatrixXd a(m, n);
    a.setZero();
    a.topLeftCorner(m_eq, n_struct) = problem.a_eq;
    a.bottomLeftCorner(m_ub, n_struct) = problem.a_ub;
    for (int i = 0; i < m_ub; ++i) a(m_eq + i, n_struct + i) = 1.0;

    Eigen::VectorXd rhs(m);
    rhs.head(m_eq) = problem.b_eq - problem.a_eq * problem.lower;
    rhs.tail(m_ub) = problem.b_ub - problem.a_ub * problem.lower;

    Eigen::VectorXd range(n);
    for (int j = 0; j < n_struct; ++j)
        range[j] = std::max(problem.upper[j] - problem.lower[j], 0.0);
    range.tail(n_slack).setConstant(kInf);

    // equilibration: row scaling by the max absolute entry, then column
    // scaling likewise; keeps the pivot tolerances meaningful when
    // coefficients span several orders of magnitude
    Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
    for (int i = 0; i < m; ++i) {
        const double mx = a.row(i).cwiseAbs().maxCoeff();
        if (mx > 0.0) row_scale[i] = 1.0 / mx;
    }
    Eigen::VectorXd col_scale = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < m; ++i) a.row(i) *= row_scale[i];
    rhs.array() *= row_scale.array();
    for (int j = 0; j < n && m > 0; ++j) {
        const double mx = a.col(j).cwiseAbs().maxCoeff();
        if (mx > 0.0) col_scale[j] = 1.0 / mx;
        a.col(j) *= col_scale[j];
    }
    Eigen::VectorXd scaled_range(n);
    for (int j = 0; j < n; ++j)
        scaled_range[j] = range[j] < kInf ? range[j] / col_scale[j] : kInf;

    // full matrix with one artificial per row (sign-flipped for negative
    // right-hand sides so artificials start feasible at +rhs)
    const int n_total = n + m;
    Eigen::MatrixXd a0(m, n_total);
    Eigen::VectorXd b0(m);
    std::vector<int> basis(m);
    Eigen::VectorXd full_range(n_total);
    full_range.head(n) = scaled_range;
    full_range.tail(m).setConstant(kInf);
    a0.setZero();
    for (int i = 0; i < m; ++i) {
        const double s = rhs[i] < 0.0 ? -1.0 : 1.0;
        a0.row(i).head(n) = s * a.row(i);
        a0(i, n + i) = 1.0;
        b0[i] = s * rhs[i];
        basis[i] = n + i;
    }

    Tableau tab(a0, b0, std::move(basis), std::move(full_range), tol);

    const int iter_cap = max_iterations > 0 ? max_iterations : 5000 + 200 * (m + n);
    int iters = 0;
    Solution out;

    Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n_total);
    phase1_cost.tail(m).setConstant(1.0);
    Status st = tab.run(phase1_cost, iter_cap, iters);
    if (st == Status::unbounded) {
        // phase 1 is bounded below by construction; retry once after a
        // clean refactorization before giving up
        tab.refactor();
        st = tab.run(phase1_cost, iter_cap, iters);
    }
    out.iterations = iters;
    if (st != Status::optimal) {
        out.status = Status::iteration_limit;
        return out;
    }
    double art_sum = 0.0;
    for (int i = 0; i < m; ++i)
        if (tab.basis()[i] >= n) art_sum += std::max(tab.basic_values()[i], 0.0);
    if (art_sum > 1e-7) {
        out.status = Status::infeasible;
        out.infeasibility = art_sum;
        return out;
    }

    tab.retire_artificials(n);

    Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(n_total);
    for (int j = 0; j < n_struct; ++j) phase2_cost[j] = problem.c[j] * col_scale[j];
    st = tab.run(phase2_cost, iter_cap, iters);
    out.iterations = iters;
    if (st != Status::optimal) {
        out.status = st;
        return out;
    }
    tab.refactor();  // final basic values from a clean factorization

    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j)
        if (tab.state(j) == VarState::at_upper && scaled_range[j] < kInf)
            y[j] = scaled_range[j];
    for (int i = 0; i < m; ++i) {
        const int col = tab.basis()[i];
        if (col >= n) continue;
        double v = tab.basic_values()[i];
        if (v < 0.0 && v > -1e-7) v = 0.0;
        if (scaled_range[col] < kInf && v > scaled_range[col] && v < scaled_range[col] + 1e-7)
            v = scaled_range[col];
        y[col] = v;
    }

    out.x = (y.head(n_struct).array() * col_scale.head(n_struct).array()).matrix() +
            problem.lower;
    out.objective = problem.c.dot(out.x);
    out.status = Status::optimal;
    return out;
}

}  // namespace cope::lp
