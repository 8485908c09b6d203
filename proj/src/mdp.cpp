#include "cope/mdp.hpp"

#include <cmath>
#include <deque>

namespace cope {

namespace {

void check_rows_stochastic(const Eigen::MatrixXd& m, double tol, const char* what) {
    for (int i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (!(v >= -tol && v <= 1.0 + tol))
                throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
    }
}

}  // namespace

void ObservedPolicy::validate(double tol) const {
    if (pi.rows() < 1 || pi.cols() < 1)
        throw std::invalid_argument("ObservedPolicy: empty table");
    check_rows_stochastic(pi, tol, "ObservedPolicy");
}

ObservedPolicy ObservedPolicy::uniform(int n_s, int n_a) {
    ObservedPolicy p;
    p.pi = Eigen::MatrixXd::Constant(n_s, n_a, 1.0 / n_a);
    return p;
}

void FullInfoPolicy::validate(double tol) const {
    if (n_s < 1 || n_u < 1 || n_a < 1 || pi.rows() != n_s * n_u || pi.cols() != n_a)
        throw std::invalid_argument("FullInfoPolicy: inconsistent dimensions");
    check_rows_stochastic(pi, tol, "FullInfoPolicy");
}

FullInfoPolicy FullInfoPolicy::from_observed(const ObservedPolicy& obs, int n_u) {
    FullInfoPolicy out;
    out.n_s = obs.n_s();
    out.n_u = n_u;
    out.n_a = obs.n_a();
    out.pi.resize(out.n_s * n_u, out.n_a);
    for (int s = 0; s < out.n_s; ++s)
        for (int u = 0; u < n_u; ++u) out.pi.row(s * n_u + u) = obs.pi.row(s);
    return out;
}

void ConfoundedMdp::validate(double tol) const {
    if (n_s < 1 || n_u < 1 || n_a < 1)
        throw std::invalid_argument("ConfoundedMdp: state/confounder/action counts must be >= 1");
    if (p.rows() != n_s * n_u * n_a || p.cols() != n_full())
        throw std::invalid_argument("ConfoundedMdp: transition table has wrong shape");
    if (phi.size() != n_s) throw std::invalid_argument("ConfoundedMdp: reward vector has wrong size");
    for (int s = 0; s < n_s; ++s)
        if (!std::isfinite(phi[s])) throw std::invalid_argument("ConfoundedMdp: non-finite reward");
    check_rows_stochastic(p, tol, "ConfoundedMdp");
}

Eigen::VectorXd StationaryDistribution::observed_marginal(int n_s, int n_u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_s);
    for (int s = 0; s < n_s; ++s)
        for (int u = 0; u < n_u; ++u) out[s] += dist[s * n_u + u];
    return out;
}

Eigen::MatrixXd induced_chain(const ConfoundedMdp& mdp, const FullInfoPolicy& policy) {
    if (policy.n_s != mdp.n_s || policy.n_u != mdp.n_u || policy.n_a != mdp.n_a)
        throw std::invalid_argument("induced_chain: policy/mdp dimension mismatch");
    const int nf = mdp.n_full();
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(nf, nf);
    for (int s = 0; s < mdp.n_s; ++s)
        for (int u = 0; u < mdp.n_u; ++u) {
            const int row = s * mdp.n_u + u;
            for (int a = 0; a < mdp.n_a; ++a) {
                const double pa = policy(s, u, a);
                if (pa == 0.0) continue;
                chain.row(row) += pa * mdp.p.row(mdp.row_index(s, u, a));
            }
        }
    return chain;
}

StationaryDistribution stationary_distribution(const Eigen::MatrixXd& chain, double tol,
                                               long max_iterations) {
    const int n = static_cast<int>(chain.rows());
    if (chain.cols() != n) throw std::invalid_argument("stationary_distribution: matrix not square");
    // iterate the half-lazy chain (M+I)/2: same stationary distribution,
    // converges even for periodic chains
    Eigen::VectorXd d = Eigen::VectorXd::Constant(n, 1.0 / n);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd md = chain.transpose() * d;
        residual = (md - d).lpNorm<1>();
        if (residual <= tol) {
            StationaryDistribution out;
            out.dist = d;
            out.residual = residual;
            return out;
        }
        d = 0.5 * (md + d);
        d /= d.sum();  // guard against drift
    }
    throw ConvergenceError("stationary_distribution: no convergence after " +
                           std::to_string(max_iterations) +
                           " iterations (final residual " + std::to_string(residual) + ")");
}

bool is_irreducible(const Eigen::MatrixXd& chain, double support_tol) {
    const int n = static_cast<int>(chain.rows());
    // strong connectivity via forward and backward BFS from state 0
    auto reach = [&](bool forward) {
        std::vector<bool> seen(n, false);
        std::deque<int> frontier{0};
        seen[0] = true;
        while (!frontier.empty()) {
            const int i = frontier.front();
            frontier.pop_front();
            for (int j = 0; j < n; ++j) {
                const double w = forward ? chain(i, j) : chain(j, i);
                if (w > support_tol && !seen[j]) {
                    seen[j] = true;
                    frontier.push_back(j);
                }
            }
        }
        for (bool s : seen)
            if (!s) return false;
        return true;
    };
    return reach(true) && reach(false);
}

double policy_value(const ConfoundedMdp& mdp, const FullInfoPolicy& policy) {
    const auto stat = stationary_distribution(induced_chain(mdp, policy));
    double value = 0.0;
    for (int s = 0; s < mdp.n_s; ++s)
        for (int u = 0; u < mdp.n_u; ++u) value += stat.dist[s * mdp.n_u + u] * mdp.phi[s];
    return value;
}

Eigen::VectorXd true_density_ratio(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b,
                                   const ObservedPolicy& pi_e, double overlap_tol) {
    const auto stat_b = stationary_distribution(induced_chain(mdp, pi_b));
    const auto full_e = FullInfoPolicy::from_observed(pi_e, mdp.n_u);
    const auto stat_e = stationary_distribution(induced_chain(mdp, full_e));
    const Eigen::VectorXd pb = stat_b.observed_marginal(mdp.n_s, mdp.n_u);
    const Eigen::VectorXd pe = stat_e.observed_marginal(mdp.n_s, mdp.n_u);
    Eigen::VectorXd w(mdp.n_s);
    for (int s = 0; s < mdp.n_s; ++s) {
        if (pb[s] < overlap_tol)
            throw OverlapError("true_density_ratio: behavior occupancy of state " +
                               std::to_string(s) + " is below the overlap threshold");
        w[s] = pe[s] / pb[s];
    }
    return w;
}

bool memoryless_confounding_check(const ConfoundedMdp& mdp, double tol) {
    for (int s = 0; s < mdp.n_s; ++s)
        for (int u = 0; u < mdp.n_u; ++u)
            for (int a = 0; a < mdp.n_a; ++a)
                for (int sp = 0; sp < mdp.n_s; ++sp) {
                    const double ref = mdp.prob(s, u, a, sp, 0);
                    for (int up = 1; up < mdp.n_u; ++up)
                        if (std::abs(mdp.prob(s, u, a, sp, up) - ref) > tol) return false;
                }
    return true;
}

}  // namespace cope
