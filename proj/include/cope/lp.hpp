#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

namespace cope::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

/// Dense linear program
///
///   min   c^T x
///   s.t.  A_eq x  = b_eq
///         A_ub x <= b_ub
///         lower <= x <= upper
///
/// Upper bounds may be +inf; lower bounds must be finite.
struct Problem {
    Eigen::VectorXd c;
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd a_ub;
    Eigen::VectorXd b_ub;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    explicit Problem(int n_vars)
        : c(Eigen::VectorXd::Zero(n_vars)),
          a_eq(0, n_vars),
          b_eq(0),
          a_ub(0, n_vars),
          b_ub(0),
          lower(Eigen::VectorXd::Zero(n_vars)),
          upper(Eigen::VectorXd::Constant(n_vars, std::numeric_limits<double>::infinity())) {}

    int n_vars() const { return static_cast<int>(c.size()); }
};

struct Solution {
    Status status = Status::iteration_limit;
    Eigen::VectorXd x;
    double objective = 0.0;
    double infeasibility = 0.0;  // phase-1 residual when status == infeasible
    int iterations = 0;

    bool ok() const { return status == Status::optimal; }
};

std::string to_string(Status s);

/// Two-phase primal simplex with bounded variables and Bland's
/// anti-cycling rule. Deterministic: identical input yields an identical
/// pivot sequence and solution.
Solution solve(const Problem& problem, double tol = 1e-9, int max_iterations = -1);

}  // namespace cope::lp
