#include "cope/estimating_system.hpp"

#include <cmath>

#include "cope/lp.hpp"

namespace cope {

Eigen::MatrixXd estimating_matrix(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                                  const ObservedPolicy& pi_e) {
    const int n_s = occ.n_s, n_a = occ.n_a;
    if (g.n_s() != n_s || g.n_a() != n_a || pi_e.n_a() != n_a)
        throw std::invalid_argument("estimating_matrix: dimension mismatch");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_s, n_s);
    for (int k = 0; k < n_s; ++k)
        for (int j = 0; j < n_s; ++j) {
            // pi_e rows are indexed by original state ids when the
            // occupancy was compacted
            const int j_orig = occ.state_map[j];
            double acc = 0.0;
            for (int aa = 0; aa < n_a; ++aa)
                acc += occ.p_jak(j, aa, k) * pi_e.pi(j_orig, aa) * g.g(k, aa, j);
            a(k, j) = acc;
        }
    for (int k = 0; k < n_s; ++k) a(k, k) -= occ.p_k[k];
    return a;
}

SystemMatrices assemble(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                        const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                        int replace_row) {
    const int n_s = occ.n_s, n_a = occ.n_a;
    if (phi.size() < n_s) throw std::invalid_argument("assemble: reward vector too short");
    SystemMatrices sys;
    sys.replaced_row = replace_row < 0 ? n_s - 1 : replace_row;
    if (sys.replaced_row >= n_s) throw std::invalid_argument("assemble: replace_row out of range");
    sys.a = estimating_matrix(g, occ, pi_e);
    sys.coeff = Tensor3(n_s, n_a, n_s);
    for (int k = 0; k < n_s; ++k)
        for (int a = 0; a < n_a; ++a)
            for (int j = 0; j < n_s; ++j)
                sys.coeff(k, a, j) = occ.p_jak(j, a, k) * pi_e.pi(occ.state_map[j], a);
    sys.b = occ.p_j;
    sys.a_tilde = sys.a;
    sys.a_tilde.row(sys.replaced_row) = sys.b.transpose();
    sys.v = Eigen::VectorXd::Zero(n_s);
    sys.v[sys.replaced_row] = 1.0;
    sys.varphi.resize(n_s);
    for (int s = 0; s < n_s; ++s) sys.varphi[s] = phi[occ.state_map[s]] * sys.b[s];
    return sys;
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const SystemMatrices& sys) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.a_tilde);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-12))
        throw SingularSystemError("estimating system is singular (rcond = " +
                                  std::to_string(rcond) + ")");
    return lu;
}

}  // namespace

Eigen::VectorXd solve_w(const SystemMatrices& sys) {
    return checked_lu(sys).solve(sys.v);
}

double objective(const SystemMatrices& sys) { return sys.varphi.dot(solve_w(sys)); }

Tensor3 gradient(const SystemMatrices& sys) {
    const auto lu = checked_lu(sys);
    const Eigen::VectorXd w = lu.solve(sys.v);
    const Eigen::VectorXd y = sys.a_tilde.transpose().partialPivLu().solve(sys.varphi);
    const int n_s = sys.n_s(), n_a = sys.coeff.dim1();
    Tensor3 grad(n_s, n_a, n_s);
    for (int k = 0; k < n_s; ++k) {
        if (k == sys.replaced_row) continue;
        for (int a = 0; a < n_a; ++a)
            for (int j = 0; j < n_s; ++j)
                grad(k, a, j) = -sys.coeff(k, a, j) * y[k] * w[j];
    }
    return grad;
}

FeasibilityResult feasibility_value(const Eigen::VectorXd& w, const EmpiricalOccupancy& occ,
                                    const ObservedPolicy& pi_e, const SensitivityBounds& bounds,
                                    MomentForm form) {
    const int n_s = occ.n_s;
    if (w.size() != n_s) throw std::invalid_argument("feasibility_value: w has wrong size");
    const auto support = support_entries(occ);
    const auto moments = moment_system(occ, form, support);
    const int n_g = static_cast<int>(support.size());

    // variables: [g over support | z slack per k]
    lp::Problem prob(n_g + n_s);
    for (int c = 0; c < n_g; ++c) {
        // bounds share the occupancy's (compacted) state indexing
        prob.lower[c] = bounds.l(support[c].j, support[c].a);
        prob.upper[c] = bounds.m(support[c].j, support[c].a);
    }
    for (int k = 0; k < n_s; ++k) prob.c[n_g + k] = 1.0;

    prob.a_eq.resize(moments.rows.rows(), prob.n_vars());
    prob.a_eq.setZero();
    prob.a_eq.leftCols(n_g) = moments.rows;
    prob.b_eq = moments.rhs;

    // residual rows: +/- (row_k . g - w_k) <= z_k
    Eigen::MatrixXd resid = Eigen::MatrixXd::Zero(n_s, n_g);
    for (int c = 0; c < n_g; ++c) {
        const auto& e = support[c];
        resid(e.k, c) = occ.p_ja_given_k(e.j, e.a, e.k) * w[e.j] * pi_e.pi(occ.state_map[e.j], e.a);
    }
    prob.a_ub.resize(2 * n_s, prob.n_vars());
    prob.a_ub.setZero();
    prob.b_ub.resize(2 * n_s);
    for (int k = 0; k < n_s; ++k) {
        prob.a_ub.row(k).head(n_g) = resid.row(k);
        prob.a_ub(k, n_g + k) = -1.0;
        prob.b_ub[k] = w[k];
        prob.a_ub.row(n_s + k).head(n_g) = -resid.row(k);
        prob.a_ub(n_s + k, n_g + k) = -1.0;
        prob.b_ub[n_s + k] = -w[k];
    }

    const auto sol = lp::solve(prob);
    FeasibilityResult out;
    if (sol.status == lp::Status::infeasible) {
        out.ambiguity_set_nonempty = false;
        return out;
    }
    if (!sol.ok()) throw std::runtime_error("feasibility_value: LP " + lp::to_string(sol.status));
    out.value = sol.objective;
    return out;
}

MarginalWeights true_marginal_weights(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b) {
    const auto stat = stationary_distribution(induced_chain(mdp, pi_b));
    const int n_s = mdp.n_s, n_u = mdp.n_u, n_a = mdp.n_a;
    MarginalWeights g(n_s, n_a, 1.0);
    for (int j = 0; j < n_s; ++j)
        for (int a = 0; a < n_a; ++a)
            for (int k = 0; k < n_s; ++k) {
                double pbar = 0.0;   // p_b(j) * sum_u p_b(u|j) p(k|j,u,a)
                double pjak = 0.0;   // p_b(j,a,k)
                for (int u = 0; u < n_u; ++u) {
                    double kernel = 0.0;
                    for (int up = 0; up < n_u; ++up) kernel += mdp.prob(j, u, a, k, up);
                    pbar += stat.dist[j * n_u + u] * kernel;
                    pjak += stat.dist[j * n_u + u] * pi_b(j, u, a) * kernel;
                }
                if (pjak > 0.0) g.g(k, a, j) = pbar / pjak;
            }
    return g;
}

}  // namespace cope
