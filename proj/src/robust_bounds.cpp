#include "cope/robust_bounds.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "cope/lp.hpp"
#include "cope/parallel.hpp"
#include "cope/rng.hpp"

namespace cope {

void PgdParams::validate() const {
    if (!(eta0 > 0.0)) throw std::invalid_argument("PgdParams: eta0 must be positive");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw std::invalid_argument("PgdParams: kappa in (0,1]");
    if (n_iters < 1 || n_restarts < 1 || repair_rounds < 1)
        throw std::invalid_argument("PgdParams: budgets must be >= 1");
}

WStepResult w_step(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                   const ObservedPolicy& pi_e) {
    const int n = occ.n_s;
    const Eigen::MatrixXd a = estimating_matrix(g, occ, pi_e);

    // variables [w | t], minimize sum t with -t <= A w <= t
    lp::Problem prob(2 * n);
    for (int i = 0; i < n; ++i) prob.c[n + i] = 1.0;
    prob.a_ub.resize(2 * n, 2 * n);
    prob.a_ub.setZero();
    prob.b_ub = Eigen::VectorXd::Zero(2 * n);
    prob.a_ub.topLeftCorner(n, n) = a;
    prob.a_ub.bottomLeftCorner(n, n) = -a;
    prob.a_ub.topRightCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    prob.a_ub.bottomRightCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    prob.a_eq.resize(1, 2 * n);
    prob.a_eq.setZero();
    prob.a_eq.row(0).head(n) = occ.p_j.transpose();
    prob.b_eq.resize(1);
    prob.b_eq[0] = 1.0;

    const auto sol = lp::solve(prob);
    if (!sol.ok()) {
        if (const char* dump = std::getenv("COPE_LP_DUMP")) {
            std::ofstream out(dump);
            out.precision(17);
            out << prob.c.transpose() << "\n" << prob.a_ub << "\n" << prob.b_ub.transpose()
                << "\n" << prob.a_eq << "\n" << prob.b_eq.transpose() << "\n";
        }
        throw std::runtime_error("w_step: LP " + lp::to_string(sol.status) +
                                 " (phase-1 residual " + std::to_string(sol.infeasibility) +
                                 ", iterations " + std::to_string(sol.iterations) + ")");
    }
    WStepResult out;
    out.w = sol.x.head(n);
    out.residual = (a * out.w).lpNorm<1>();
    return out;
}

namespace {

// Shared L1-projection machinery: minimizes ||g - g0||_1 over the box and
// the given equality rows via the split g = g0 + p - q, p,q >= 0.
std::optional<MarginalWeights> l1_repair(const MarginalWeights& g0,
                                         const SensitivityBounds& bounds,
                                         const std::vector<SupportEntry>& support,
                                         const Eigen::MatrixXd& rows,
                                         const Eigen::VectorXd& rhs) {
    const int n_g = static_cast<int>(support.size());
    Eigen::VectorXd g0s(n_g);
    for (int c = 0; c < n_g; ++c) g0s[c] = g0.g.flat()[support[c].flat];

    lp::Problem prob(2 * n_g);
    prob.c.setOnes();
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        prob.upper[c] = std::max(bounds.m(e.j, e.a) - g0s[c], 0.0);
        prob.upper[n_g + c] = std::max(g0s[c] - bounds.l(e.j, e.a), 0.0);
    }
    prob.a_eq.resize(rows.rows(), 2 * n_g);
    prob.a_eq.leftCols(n_g) = rows;
    prob.a_eq.rightCols(n_g) = -rows;
    prob.b_eq = rhs - rows * g0s;

    const auto sol = lp::solve(prob);
    if (sol.status == lp::Status::infeasible) return std::nullopt;
    if (!sol.ok()) throw std::runtime_error("l1_repair: LP " + lp::to_string(sol.status));

    MarginalWeights g = g0;
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        double v = g0s[c] + sol.x[c] - sol.x[n_g + c];
        v = std::min(std::max(v, bounds.l(e.j, e.a)), bounds.m(e.j, e.a));
        g.g.flat()[support[c].flat] = v;
    }
    return g;
}

}  // namespace

std::optional<MarginalWeights> g_step(const MarginalWeights& g0, const Eigen::VectorXd& w_star,
                                      const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                      const SensitivityBounds& bounds, MomentForm form) {
    const int n_s = occ.n_s;
    const auto support = support_entries(occ);
    const auto moments = moment_system(occ, form, support);
    const int n_g = static_cast<int>(support.size());

    // moment rows plus the estimating equation at fixed w_star:
    //   sum_{j,a} p(j,a,k) pi_e(a|j) w_j g_k(a|j) = p(k) w_k
    Eigen::MatrixXd rows(moments.rows.rows() + n_s, n_g);
    Eigen::VectorXd rhs(moments.rhs.size() + n_s);
    rows.topRows(moments.rows.rows()) = moments.rows;
    rhs.head(moments.rhs.size()) = moments.rhs;
    rows.bottomRows(n_s).setZero();
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        rows(moments.rows.rows() + e.k, c) =
            occ.p_jak(e.j, e.a, e.k) * pi_e.pi(occ.state_map[e.j], e.a) * w_star[e.j];
    }
    for (int k = 0; k < n_s; ++k)
        rhs[moments.rhs.size() + k] = occ.p_k[k] * w_star[k];

    return l1_repair(g0, bounds, support, rows, rhs);
}

std::optional<MarginalWeights> project_to_moments(const MarginalWeights& g0,
                                                  const EmpiricalOccupancy& occ,
                                                  const SensitivityBounds& bounds,
                                                  MomentForm form) {
    const auto support = support_entries(occ);
    const auto moments = moment_system(occ, form, support);
    return l1_repair(g0, bounds, support, moments.rows, moments.rhs);
}

std::optional<MarginalWeights> g_step_soft(const MarginalWeights& g0,
                                           const Eigen::VectorXd& w_star,
                                           const EmpiricalOccupancy& occ,
                                           const ObservedPolicy& pi_e,
                                           const SensitivityBounds& bounds, MomentForm form,
                                           double mu) {
    const int n_s = occ.n_s;
    const auto support = support_entries(occ);
    const auto moments = moment_system(occ, form, support);
    const int n_g = static_cast<int>(support.size());

    Eigen::VectorXd g0s(n_g);
    for (int c = 0; c < n_g; ++c) g0s[c] = g0.g.flat()[support[c].flat];

    // estimating rows and targets at the fixed w_star
    Eigen::MatrixXd est = Eigen::MatrixXd::Zero(n_s, n_g);
    Eigen::VectorXd target(n_s);
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        est(e.k, c) = occ.p_jak(e.j, e.a, e.k) * pi_e.pi(occ.state_map[e.j], e.a) * w_star[e.j];
    }
    for (int k = 0; k < n_s; ++k) target[k] = occ.p_k[k] * w_star[k];

    // variables [p | q | r]: g = g0 + p - q, r bounds the row residuals
    lp::Problem prob(2 * n_g + n_s);
    for (int c = 0; c < n_g; ++c) {
        prob.c[c] = mu;
        prob.c[n_g + c] = mu;
        const auto& e = support[c];
        prob.upper[c] = std::max(bounds.m(e.j, e.a) - g0s[c], 0.0);
        prob.upper[n_g + c] = std::max(g0s[c] - bounds.l(e.j, e.a), 0.0);
    }
    for (int k = 0; k < n_s; ++k) prob.c[2 * n_g + k] = 1.0;

    prob.a_eq.resize(moments.rows.rows(), prob.n_vars());
    prob.a_eq.setZero();
    prob.a_eq.leftCols(n_g) = moments.rows;
    prob.a_eq.middleCols(n_g, n_g) = -moments.rows;
    prob.b_eq = moments.rhs - moments.rows * g0s;

    prob.a_ub.resize(2 * n_s, prob.n_vars());
    prob.a_ub.setZero();
    prob.b_ub.resize(2 * n_s);
    const Eigen::VectorXd resid0 = target - est * g0s;
    for (int k = 0; k < n_s; ++k) {
        prob.a_ub.row(k).head(n_g) = est.row(k);
        prob.a_ub.row(k).segment(n_g, n_g) = -est.row(k);
        prob.a_ub(k, 2 * n_g + k) = -1.0;
        prob.b_ub[k] = resid0[k];
        prob.a_ub.row(n_s + k).head(n_g) = -est.row(k);
        prob.a_ub.row(n_s + k).segment(n_g, n_g) = est.row(k);
        prob.a_ub(n_s + k, 2 * n_g + k) = -1.0;
        prob.b_ub[n_s + k] = -resid0[k];
    }

    const auto sol = lp::solve(prob);
    if (sol.status == lp::Status::infeasible) return std::nullopt;
    if (!sol.ok()) throw std::runtime_error("g_step_soft: LP " + lp::to_string(sol.status));

    MarginalWeights g = g0;
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        double v = g0s[c] + sol.x[c] - sol.x[n_g + c];
        v = std::min(std::max(v, bounds.l(e.j, e.a)), bounds.m(e.j, e.a));
        g.g.flat()[support[c].flat] = v;
    }
    return g;
}

MarginalWeights project_box(const MarginalWeights& g, const SensitivityBounds& bounds) {
    MarginalWeights out = g;
    for (int k = 0; k < g.n_s(); ++k)
        for (int a = 0; a < g.n_a(); ++a)
            for (int j = 0; j < g.n_s(); ++j)
                out.g(k, a, j) = std::min(std::max(g.g(k, a, j), bounds.l(j, a)), bounds.m(j, a));
    return out;
}

double naive_value(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                   const Eigen::VectorXd& phi) {
    const auto g = nominal_weights(occ.pi_b_marginal);
    return objective(assemble(g, occ, pi_e, phi));
}

namespace {

struct ChainResult {
    bool found = false;
    double best = 0.0;
    MarginalWeights best_g;
    RestartDiagnostics diag;
};

ChainResult run_chain(int restart, Direction direction, const EmpiricalOccupancy& occ,
                      const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                      const SensitivityBounds& bounds, const PgdParams& params,
                      const std::vector<MarginalWeights>& warm_starts) {
    const double sign = direction == Direction::maximize ? 1.0 : -1.0;
    auto rng = make_rng(params.seed,
                        derive_seed(direction == Direction::maximize ? 1 : 2, restart));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // density-ratio anchor: a random normalized w tilted along the
    // objective direction, so anchors cover the value range of the
    // identified set rather than clustering around the naive point
    auto draw_anchor_w = [&]() {
        std::exponential_distribution<double> expd(1.0);
        Eigen::VectorXd rewards(occ.n_s);
        for (int s = 0; s < occ.n_s; ++s) rewards[s] = phi[occ.state_map[s]];
        const double span = rewards.maxCoeff() - rewards.minCoeff();
        const double tau = 8.0 * unif(rng);
        Eigen::VectorXd w0(occ.n_s);
        for (int j = 0; j < occ.n_s; ++j) {
            const double tilt =
                span > 0.0 ? std::exp(sign * tau * (rewards[j] - rewards.mean()) / span) : 1.0;
            w0[j] = expd(rng) * tilt;
        }
        w0 /= occ.p_j.dot(w0);
        return w0;
    };

    ChainResult out;
    out.diag.restart = restart;

    // Restart 0 anchors at the nominal weights and the next restarts take
    // the warm starts. The rest alternate between uniform box samples and
    // density-ratio anchors: draw a random normalized w and take the
    // nearest ambiguity-set point making it stationary. The box is huge at
    // large gamma while w-space has only |S| dimensions, so the anchors
    // spread the chains across the whole identified set.
    MarginalWeights g;
    if (restart == 0) {
        g = nominal_weights(occ.pi_b_marginal);
    } else if (restart - 1 < static_cast<int>(warm_starts.size())) {
        g = project_box(warm_starts[restart - 1], bounds);
    } else if (restart % 2 == 0) {
        g = nominal_weights(occ.pi_b_marginal);
        for (int k = 0; k < g.n_s(); ++k)
            for (int a = 0; a < g.n_a(); ++a)
                for (int j = 0; j < g.n_s(); ++j)
                    g.g(k, a, j) =
                        bounds.l(j, a) + unif(rng) * (bounds.m(j, a) - bounds.l(j, a));
    } else {
        const Eigen::VectorXd w0 = draw_anchor_w();
        auto anchored = g_step_soft(nominal_weights(occ.pi_b_marginal), w0, occ, pi_e, bounds,
                                    params.moment_form, 1e-6);
        g = anchored ? *anchored : nominal_weights(occ.pi_b_marginal);
    }
    if (auto proj = project_to_moments(g, occ, bounds, params.moment_form))
        g = *proj;
    else
        return out;  // empty box+moment set; caller pre-checks, so this is a dead chain

    for (int it = 0; it < params.n_iters; ++it) {
        const MarginalWeights g_pre = g;
        WStepResult ws;
        for (int round = 0; round < params.repair_rounds; ++round) {
            ws = w_step(g, occ, pi_e);
            if (ws.residual <= 1e-9) break;
            auto repaired = g_step(g, ws.w, occ, pi_e, bounds, params.moment_form);
            if (!repaired) repaired = g_step_soft(g, ws.w, occ, pi_e, bounds, params.moment_form);
            if (!repaired) break;
            g = *repaired;
        }
        ws = w_step(g, occ, pi_e);
        const bool feasible =
            ws.residual <= params.w_residual_tol &&
            is_in_ambiguity_set(g, occ, bounds, params.feasibility_tol, params.moment_form)
                .member;

        bool singular = false;
        double value = 0.0;
        Tensor3 grad;
        try {
            const auto sys = assemble(g, occ, pi_e, phi);
            value = objective(sys);
            grad = gradient(sys);
        } catch (const SingularSystemError&) {
            singular = true;
            ++out.diag.singular_skips;
        }

        if (feasible && !singular) {
            ++out.diag.feasible_iterates;
            if (!out.found || sign * value > sign * out.best) {
                out.found = true;
                out.best = value;
                out.best_g = g;
            }
        }

        // gradient ascent/descent step, projected back to the box
        const double eta = params.eta0 * std::pow(it + 1.0, -params.kappa);
        if (singular) {
            // nudge off the degenerate point, staying inside the box
            for (auto& v : g.g.flat()) v += (unif(rng) - 0.5) * 0.02 * v;
            g = project_box(g, bounds);
            continue;
        }
        const MarginalWeights& base = params.step_from_repaired ? g : g_pre;
        MarginalWeights next = base;
        for (size_t i = 0; i < next.g.flat().size(); ++i)
            next.g.flat()[i] += sign * eta * grad.flat()[i];
        g = project_box(next, bounds);
    }

    out.diag.found_feasible = out.found;
    out.diag.best_value = out.best;
    return out;
}

}  // namespace

ExtremumResult pgd_extremum(Direction direction, const EmpiricalOccupancy& occ,
                            const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                            const SensitivityBounds& bounds, const PgdParams& params,
                            const std::vector<MarginalWeights>& warm_starts) {
    params.validate();
    // one feasibility LP up front: is box + moments nonempty at all?
    if (!project_to_moments(nominal_weights(occ.pi_b_marginal), occ, bounds, params.moment_form))
        throw EmptyAmbiguitySetError("ambiguity set is empty at gamma = " +
                                     std::to_string(bounds.gamma));

    std::vector<ChainResult> chains(params.n_restarts);
    parallel_for(params.n_restarts, params.threads, [&](int r) {
        chains[r] = run_chain(r, direction, occ, pi_e, phi, bounds, params, warm_starts);
    });

    const double sign = direction == Direction::maximize ? 1.0 : -1.0;
    ExtremumResult out;
    bool found = false;
    for (const auto& chain : chains) {
        out.restarts.push_back(chain.diag);
        if (chain.found && (!found || sign * chain.best > sign * out.value)) {
            found = true;
            out.value = chain.best;
            out.g = chain.best_g;
        }
    }
    if (!found)
        throw EmptyAmbiguitySetError(
            "no feasible iterate found at gamma = " + std::to_string(bounds.gamma) +
            " (partial identification set may be empty)");
    const auto ws = w_step(out.g, occ, pi_e);
    out.w = ws.w;
    out.w_residual = ws.residual;
    return out;
}

BoundsResult bounds_at_gamma(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                             const Eigen::VectorXd& phi, double gamma, const PgdParams& params,
                             const std::vector<MarginalWeights>& warm_lower,
                             const std::vector<MarginalWeights>& warm_upper) {
    const auto bounds = bounds_for_occupancy(gamma, occ);
    BoundsResult out;
    out.gamma = gamma;
    try {
        out.naive = naive_value(occ, pi_e, phi);
    } catch (const SingularSystemError&) {
        out.naive = std::numeric_limits<double>::quiet_NaN();
    }
    try {
        auto lo = pgd_extremum(Direction::minimize, occ, pi_e, phi, bounds, params, warm_lower);
        auto hi = pgd_extremum(Direction::maximize, occ, pi_e, phi, bounds, params, warm_upper);
        out.lower = out.lower_raw = lo.value;
        out.upper = out.upper_raw = hi.value;
        out.lower_g = std::move(lo.g);
        out.upper_g = std::move(hi.g);
        out.lower_restarts = std::move(lo.restarts);
        out.upper_restarts = std::move(hi.restarts);
        out.feasible = true;
    } catch (const EmptyAmbiguitySetError& e) {
        out.feasible = false;
        out.error = e.what();
    } catch (const SingularSystemError& e) {
        out.feasible = false;
        out.error = e.what();
    }
    return out;
}

std::vector<BoundsResult> sweep_gamma(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                      const Eigen::VectorXd& phi,
                                      const std::vector<double>& gammas,
                                      const PgdParams& params) {
    for (size_t i = 1; i < gammas.size(); ++i)
        if (gammas[i] < gammas[i - 1])
            throw std::invalid_argument("sweep_gamma: gammas must be ascending");
    std::vector<BoundsResult> results;
    std::vector<MarginalWeights> warm_lower, warm_upper;
    for (double gamma : gammas) {
        BoundsResult res = bounds_at_gamma(occ, pi_e, phi, gamma, params, warm_lower, warm_upper);
        if (res.feasible) {
            warm_lower = {res.lower_g};
            warm_upper = {res.upper_g};
        }
        results.push_back(std::move(res));
    }
    // monotone envelope over the feasible rows
    bool have_prev = false;
    double lo_env = 0.0, hi_env = 0.0;
    for (auto& res : results) {
        if (!res.feasible) continue;
        if (have_prev) {
            lo_env = std::min(lo_env, res.lower_raw);
            hi_env = std::max(hi_env, res.upper_raw);
        } else {
            lo_env = res.lower_raw;
            hi_env = res.upper_raw;
            have_prev = true;
        }
        res.lower = lo_env;
        res.upper = hi_env;
    }
    return results;
}

}  // namespace cope
