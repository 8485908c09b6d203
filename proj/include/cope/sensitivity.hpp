#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cope/occupancy.hpp"
#include "cope/tensor.hpp"

namespace cope {

/// Per-(state,action) interval [l(a|s), m(a|s)] on the inverse behavior
/// propensity, induced by the odds-ratio sensitivity parameter gamma.
struct SensitivityBounds {
    double gamma = 1.0;
    Eigen::MatrixXd l;  // (s, a)
    Eigen::MatrixXd m;  // (s, a)

    int n_s() const { return static_cast<int>(l.rows()); }
    int n_a() const { return static_cast<int>(l.cols()); }
};

/// Decision tensor g_k(a|j), indexed (k, a, j).
struct MarginalWeights {
    Tensor3 g;

    MarginalWeights() = default;
    MarginalWeights(int n_s, int n_a, double fill = 0.0) : g(n_s, n_a, n_s, fill) {}
    int n_s() const { return g.dim0(); }
    int n_a() const { return g.dim1(); }
};

/// The odds-ratio model bounds the confounded propensity's odds within a
/// factor gamma of the marginal's odds, which pins the inverse propensity
/// beta = 1/pi_b(a|s,u) to
///
///   1 + (1/gamma) (1/pi_b(a|s) - 1)  <=  beta  <=  1 + gamma (1/pi_b(a|s) - 1).
///
/// These are the min and max of the two printed closed forms
/// gamma/pi_b + 1 - gamma and 1/(gamma pi_b) + 1 - 1/gamma.
/// Throws OverlapError when some pi_b(a|s) is zero.
SensitivityBounds bounds_from_gamma(double gamma, const Eigen::MatrixXd& pi_b_marginal);

/// Like bounds_from_gamma on occ.pi_b_marginal, but (state, action) pairs
/// never taken in the sample get the placeholder interval [1, 1]. Such
/// pairs have p(j,a,k) = 0 for every k, so they are off the support of
/// the estimating system and the placeholder is never read. This is what
/// the solvers use on short trajectories.
SensitivityBounds bounds_for_occupancy(double gamma, const EmpiricalOccupancy& occ);

/// g with every entry at the nominal inverse propensity 1/pi_b(a|j),
/// broadcast over next states; off-support entries (zero marginal) get 1.
/// Always box-feasible; the whole box at gamma = 1.
MarginalWeights nominal_weights(const Eigen::MatrixXd& pi_b_marginal);

/// Which identifiable version of the next-state conditional moment
/// constraints to impose on g:
///  - per_next_state_action: sum_j p(j,a,k) g_k(a|j) = p(k|a) for all k,a
///  - action_marginal:       sum_{j,k} p(j,a,k) g_k(a|j) = 1 for all a
/// The action-marginal form is always satisfied by the nominal weights and
/// is the one used in the reference experiments.
enum class MomentForm { per_next_state_action, action_marginal };

std::string to_string(MomentForm form);

struct ConstraintViolation {
    enum class Kind { box_lower, box_upper, moment } kind;
    int k = -1, a = -1, j = -1;  // unused indices are -1
    double magnitude = 0.0;
};

struct MembershipReport {
    bool member = true;
    std::vector<ConstraintViolation> violations;
    double max_violation = 0.0;
};

/// Checks g against the box (only where p(j,a,k) > 0) and the moment
/// constraints, reporting every violated constraint with its magnitude.
/// Suggested tolerances: 1e-8 for population inputs, 1e-4 or looser for
/// empirical ones (the moments only hold asymptotically on samples).
MembershipReport is_in_ambiguity_set(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                                     const SensitivityBounds& bounds, double tol,
                                     MomentForm form = MomentForm::per_next_state_action);

/// One support entry of the decision tensor: a (k,a,j) cell with
/// p(j,a,k) > 0. Cells off the support never enter the estimating system
/// and are pinned to nominal by the solvers.
struct SupportEntry {
    int k, a, j;
    size_t flat;  // index into MarginalWeights::g.flat()
};

std::vector<SupportEntry> support_entries(const EmpiricalOccupancy& occ);

/// Moment constraint rows over the support entries of g (one column per
/// support entry).
struct MomentSystem {
    Eigen::MatrixXd rows;
    Eigen::VectorXd rhs;
};

MomentSystem moment_system(const EmpiricalOccupancy& occ, MomentForm form,
                           const std::vector<SupportEntry>& support);

}  // namespace cope
