#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace cope {

/// Raised when a stationary-density ratio is requested for a state whose
/// behavior occupancy is numerically zero.
struct OverlapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when an iterative solver fails to reach its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Policy over observed states only: pi(a|s).
struct ObservedPolicy {
    Eigen::MatrixXd pi;  // (s, a)

    int n_s() const { return static_cast<int>(pi.rows()); }
    int n_a() const { return static_cast<int>(pi.cols()); }
    void validate(double tol = 1e-12) const;

    static ObservedPolicy uniform(int n_s, int n_a);
};

/// Policy over full-information states: pi(a|s,u).
struct FullInfoPolicy {
    int n_s = 0, n_u = 0, n_a = 0;
    Eigen::MatrixXd pi;  // row = s*n_u+u, col = a

    double operator()(int s, int u, int a) const { return pi(s * n_u + u, a); }
    double& at(int s, int u, int a) { return pi(s * n_u + u, a); }
    void validate(double tol = 1e-12) const;

    static FullInfoPolicy from_observed(const ObservedPolicy& obs, int n_u);
};

/// Tabular MDP on the product state space S x U with rewards on S only.
/// The transition tensor is stored as one row-stochastic row per
/// (s,u,a) triple over next full states (s',u').
struct ConfoundedMdp {
    int n_s = 0, n_u = 0, n_a = 0;
    Eigen::MatrixXd p;      // row = (s*n_u+u)*n_a+a, col = s'*n_u+u'
    Eigen::VectorXd phi;    // reward per observed state

    int n_full() const { return n_s * n_u; }
    int row_index(int s, int u, int a) const { return (s * n_u + u) * n_a + a; }
    double prob(int s, int u, int a, int sp, int up) const {
        return p(row_index(s, u, a), sp * n_u + up);
    }
    double& prob_at(int s, int u, int a, int sp, int up) {
        return p(row_index(s, u, a), sp * n_u + up);
    }
    void validate(double tol = 1e-12) const;
};

struct StationaryDistribution {
    Eigen::VectorXd dist;  // over full states (s,u)
    double residual = 0.0;  // || dist^T M - dist^T ||_1

    Eigen::VectorXd observed_marginal(int n_s, int n_u) const;
};

/// M[(s,u) -> (s',u')] = sum_a pi(a|s,u) P(s',u'|s,u,a).
Eigen::MatrixXd induced_chain(const ConfoundedMdp& mdp, const FullInfoPolicy& policy);

/// Power iteration from the uniform vector, stopping at L1 invariance
/// residual <= tol. Throws ConvergenceError when the cap is exceeded.
/// Reducible chains with several stationary distributions are not
/// detected; use is_irreducible as a pre-scan if in doubt.
StationaryDistribution stationary_distribution(const Eigen::MatrixXd& chain,
                                               double tol = 1e-12,
                                               long max_iterations = 1000000);

/// Reachability scan over the support graph of a chain (validation
/// utility; ergodicity is otherwise asserted, not verified).
bool is_irreducible(const Eigen::MatrixXd& chain, double support_tol = 0.0);

/// Long-run average reward E_{s ~ p_inf}[phi(s)] under the policy.
double policy_value(const ConfoundedMdp& mdp, const FullInfoPolicy& policy);

/// w(s) = p_e^inf(s) / p_b^inf(s), valid under memoryless confounding.
/// Throws OverlapError when some p_b^inf(s) < overlap_tol.
Eigen::VectorXd true_density_ratio(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b,
                                   const ObservedPolicy& pi_e, double overlap_tol = 1e-12);

/// True iff P(j,u'|k,u,a) is constant over u' for every (k,u,a,j), the
/// sufficient condition for memoryless confounding.
bool memoryless_confounding_check(const ConfoundedMdp& mdp, double tol = 1e-12);

}  // namespace cope
