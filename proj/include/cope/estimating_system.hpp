#pragma once

#include <Eigen/Dense>

#include "cope/mdp.hpp"
#include "cope/occupancy.hpp"
#include "cope/sensitivity.hpp"

namespace cope {

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The estimating equation for a fixed g as a matrix system.
///
///   A(g)[k][j] = sum_a p(j,a,k) pi_e(a|j) g_k(a|j) - 1[j=k] p(k)
///
/// A(g) w = 0 is the stationarity condition scaled by p(k); b^T w = 1 is
/// the normalization. a_tilde replaces row `replaced_row` of A by b, and
/// w = a_tilde^{-1} v with v the last unit vector.
struct SystemMatrices {
    Eigen::MatrixXd a;        // A(g)
    Eigen::MatrixXd a_tilde;  // A with one row replaced by b
    Eigen::VectorXd b;        // current-state occupancy marginal
    Eigen::VectorXd v;        // (0,...,0,1) with the 1 at replaced_row
    Eigen::VectorXd varphi;   // phi(s) * b(s)
    Tensor3 coeff;            // pi_e(a|j) * p(j,a,k), indexed (k,a,j)
    int replaced_row = 0;

    int n_s() const { return static_cast<int>(a.rows()); }
};

/// Builds the system; `replace_row` = -1 means the last row (the default
/// convention; any single row gives the same w for feasible g).
SystemMatrices assemble(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                        const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                        int replace_row = -1);

/// Just A(g), shared by assemble and the w-step LP.
Eigen::MatrixXd estimating_matrix(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                                  const ObservedPolicy& pi_e);

/// w = a_tilde^{-1} v via dense LU with partial pivoting. Throws
/// SingularSystemError when the reciprocal condition estimate is below
/// 1e-12 (g infeasible or degenerate).
Eigen::VectorXd solve_w(const SystemMatrices& sys);

/// varphi^T a_tilde^{-1} v; equals the policy value when g and the
/// occupancy are the population truth.
double objective(const SystemMatrices& sys);

/// d objective / d g_k(a|j), from the matrix chain rule:
///   -1[k != replaced_row] pi_e(a|j) p(j,a,k) (a_tilde^{-T} varphi)_k (a_tilde^{-1} v)_j.
/// The replaced row contributes zero; entries with p(j,a,k)=0 are zero.
Tensor3 gradient(const SystemMatrices& sys);

struct FeasibilityResult {
    bool ambiguity_set_nonempty = true;
    double value = 0.0;  // F(w); meaningful when ambiguity_set_nonempty
};

/// F(w) = min_{g in ambiguity set} sum_k | sum_{j,a} p(j,a|k) w_j pi_e(a|j)
/// g_k(a|j) - w_k |, the L1-epigraph linear program. F(w) = 0 exactly when
/// w is consistent with the data and the sensitivity model; an empty
/// ambiguity set is reported distinctly from F(w) > 0.
FeasibilityResult feasibility_value(const Eigen::VectorXd& w, const EmpiricalOccupancy& occ,
                                    const ObservedPolicy& pi_e, const SensitivityBounds& bounds,
                                    MomentForm form = MomentForm::action_marginal);

/// Ground-truth marginal weights from the simulator's full-information
/// law: g_k(a|j) = p_b(j) pbar(k|j,a) / p_b(j,a,k), where pbar averages the
/// kernel over the behavior stationary confounder conditional. Entries
/// with p_b(j,a,k) = 0 are set to 1 (they never enter the system).
MarginalWeights true_marginal_weights(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b);

}  // namespace cope
