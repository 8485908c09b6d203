#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cope/estimating_system.hpp"

namespace cope {

/// The partial identification set is empty at this gamma: no g satisfies
/// the box, the moments, and the estimating equation together.
struct EmptyAmbiguitySetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Direction { minimize, maximize };

struct PgdParams {
    double eta0 = 0.5;       // initial step size
    double kappa = 0.5;      // polynomial decay exponent in (0,1]
    int n_iters = 200;
    int n_restarts = 10;
    int repair_rounds = 3;   // alternating (w-step, g-step) rounds per iterate
    uint64_t seed = 0;
    MomentForm moment_form = MomentForm::action_marginal;
    // Gradient step base. The default steps from the pre-repair iterate:
    // the repair is a near-projection, so stepping from the repaired point
    // gets projected straight back and the chain stalls at second order.
    // true gives the repaired-base variant.
    bool step_from_repaired = false;
    double feasibility_tol = 1e-6;   // ambiguity-set membership tolerance
    double w_residual_tol = 1e-6;    // ||A(g) w*||_1 tolerance
    int threads = 1;

    void validate() const;
};

struct WStepResult {
    Eigen::VectorXd w;
    double residual = 0.0;  // min ||A(g) w||_1
};

/// argmin_w { ||A(g) w||_1 : b^T w = 1, w >= 0 }.
WStepResult w_step(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                   const ObservedPolicy& pi_e);

/// Nearest-in-L1 member of the ambiguity set making w_star exactly
/// stationary:
///   argmin_g { ||g - g0||_1 : A(g) w_star = 0, g in box, moments }.
/// Linear in g for fixed w_star; nullopt when infeasible (the w-step's
/// vertex solutions can have exact zeros that no g can reproduce).
std::optional<MarginalWeights> g_step(const MarginalWeights& g0, const Eigen::VectorXd& w_star,
                                      const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                      const SensitivityBounds& bounds, MomentForm form);

/// Fallback repair when the exact g-step is infeasible: minimizes the L1
/// residual of the estimating rows over the ambiguity set, with a small
/// L1 proximity term that keeps the iterate near g0:
///   argmin_g { ||A(g) w_star||_1 + mu ||g - g0||_1 : g in box, moments }.
/// nullopt only when box + moments themselves are empty.
std::optional<MarginalWeights> g_step_soft(const MarginalWeights& g0,
                                           const Eigen::VectorXd& w_star,
                                           const EmpiricalOccupancy& occ,
                                           const ObservedPolicy& pi_e,
                                           const SensitivityBounds& bounds, MomentForm form,
                                           double mu = 1e-3);

/// Entrywise clip to [l(a|j), m(a|j)].
MarginalWeights project_box(const MarginalWeights& g, const SensitivityBounds& bounds);

/// argmin_g { ||g - g0||_1 : g in box, moments }; nullopt when the
/// ambiguity set itself is empty.
std::optional<MarginalWeights> project_to_moments(const MarginalWeights& g0,
                                                  const EmpiricalOccupancy& occ,
                                                  const SensitivityBounds& bounds,
                                                  MomentForm form);

/// Objective at the nominal weights 1/pi_b(a|j): the naive stationary
/// importance-sampling estimate.
double naive_value(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                   const Eigen::VectorXd& phi);

struct RestartDiagnostics {
    int restart = 0;
    bool found_feasible = false;
    double best_value = 0.0;
    int feasible_iterates = 0;
    int singular_skips = 0;
};

struct ExtremumResult {
    double value = 0.0;
    MarginalWeights g;       // witness achieving `value`
    Eigen::VectorXd w;       // density ratio at the witness
    double w_residual = 0.0;
    std::vector<RestartDiagnostics> restarts;
};

/// Projected gradient ascent/descent over g with alternating-LP
/// feasibility repair. Returns the best objective among iterates that
/// pass both feasibility tolerances; singular iterates are skipped.
/// Throws EmptyAmbiguitySetError when no feasible iterate is ever found.
ExtremumResult pgd_extremum(Direction direction, const EmpiricalOccupancy& occ,
                            const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                            const SensitivityBounds& bounds, const PgdParams& params,
                            const std::vector<MarginalWeights>& warm_starts = {});

struct BoundsResult {
    double gamma = 1.0;
    bool feasible = false;
    double lower = 0.0, upper = 0.0;          // enveloped values in sweeps
    double lower_raw = 0.0, upper_raw = 0.0;  // per-gamma optimizer output
    double naive = 0.0;
    MarginalWeights lower_g, upper_g;
    std::string error;  // set when feasible == false
    std::vector<RestartDiagnostics> lower_restarts, upper_restarts;
};

/// Both directions plus the naive estimate at one gamma.
BoundsResult bounds_at_gamma(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                             const Eigen::VectorXd& phi, double gamma, const PgdParams& params,
                             const std::vector<MarginalWeights>& warm_lower = {},
                             const std::vector<MarginalWeights>& warm_upper = {});

/// Ascending-gamma sweep with warm starts from the previous gamma's
/// witnesses and a post-hoc monotone envelope (lower running-min, upper
/// running-max). Per-gamma failures are recorded and the sweep continues.
std::vector<BoundsResult> sweep_gamma(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                      const Eigen::VectorXd& phi,
                                      const std::vector<double>& gammas, const PgdParams& params);

}  // namespace cope
