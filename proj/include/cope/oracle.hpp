#pragma once

#include "cope/robust_bounds.hpp"

namespace cope {

struct OracleParams {
    long n_samples = 20000;  // random box samples
    int n_polish = 5;        // alternating repair rounds per candidate
    uint64_t seed = 0;
    MomentForm moment_form = MomentForm::action_marginal;
    double feasibility_tol = 1e-6;
    double w_residual_tol = 1e-6;
    int threads = 1;

    void validate() const;
};

struct OracleResult {
    bool found_feasible = false;
    double lower = 0.0, upper = 0.0;
    MarginalWeights lower_g, upper_g;
    long n_feasible = 0;
    long n_evaluated = 0;
};

/// Brute-force reference solver for tiny instances: samples g uniformly in
/// the box, repairs onto the moment constraints by a nearest-point LP and
/// onto the estimating equation by alternating (w-step, g-step), and
/// records the objective extremes over all candidates passing the same
/// feasibility tolerances as the gradient solver. An inner approximation:
/// it only ever finds feasible points. Intended for |S| <= 4 (warns on
/// stderr above that).
OracleResult brute_force_bounds(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                const Eigen::VectorXd& phi, const SensitivityBounds& bounds,
                                const OracleParams& params);

}  // namespace cope
