#include "cope/environments.hpp"

#include <cmath>

namespace cope {

void RandomWalkParams::validate() const {
    if (!(p_u1 >= 0.0 && p_u1 <= 0.5) || !(p_u2 >= 0.0 && p_u2 <= 0.5))
        throw std::invalid_argument("RandomWalkParams: p_u1, p_u2 must lie in [0, 0.5]");
    if (!(pi_a1_given_u1 >= 0.0 && pi_a1_given_u1 <= 1.0))
        throw std::invalid_argument("RandomWalkParams: pi_a1_given_u1 must lie in [0, 1]");
    if (u_dist[0] < 0.0 || u_dist[1] < 0.0 || std::abs(u_dist[0] + u_dist[1] - 1.0) > 1e-12)
        throw std::invalid_argument("RandomWalkParams: u_dist must be a distribution");
}

namespace {

// stay probability at s1 for (u, a); the s2 table is the (u,a) swap
double rw_stay_s1(const RandomWalkParams& params, int u, int a) {
    if (u == 0 && a == 0) return params.p_u1;
    if (u == 1 && a == 0) return 0.5 - params.p_u2;
    if (u == 0 && a == 1) return 1.0 - params.p_u1;
    return 0.5 + params.p_u2;  // u == 1, a == 1
}

}  // namespace

std::pair<ConfoundedMdp, FullInfoPolicy> build_random_walk(const RandomWalkParams& params) {
    params.validate();
    ConfoundedMdp mdp;
    mdp.n_s = 2;
    mdp.n_u = 2;
    mdp.n_a = 2;
    mdp.p = Eigen::MatrixXd::Zero(mdp.n_s * mdp.n_u * mdp.n_a, mdp.n_full());
    for (int s = 0; s < 2; ++s)
        for (int u = 0; u < 2; ++u)
            for (int a = 0; a < 2; ++a) {
                const double stay =
                    s == 0 ? rw_stay_s1(params, u, a) : rw_stay_s1(params, 1 - u, 1 - a);
                for (int up = 0; up < 2; ++up) {
                    mdp.prob_at(s, u, a, s, up) = stay * params.u_dist[up];
                    mdp.prob_at(s, u, a, 1 - s, up) = (1.0 - stay) * params.u_dist[up];
                }
            }
    mdp.phi = Eigen::VectorXd::Zero(2);
    mdp.validate();

    FullInfoPolicy behavior = random_walk_behavior(params.pi_a1_given_u1, params.pi_a1_given_u1);
    return {std::move(mdp), std::move(behavior)};
}

FullInfoPolicy random_walk_behavior(double pi_s1, double pi_s2) {
    FullInfoPolicy pol;
    pol.n_s = 2;
    pol.n_u = 2;
    pol.n_a = 2;
    pol.pi.resize(4, 2);
    const double pis[2] = {pi_s1, pi_s2};
    for (int s = 0; s < 2; ++s) {
        pol.at(s, 0, 0) = pis[s];
        pol.at(s, 0, 1) = 1.0 - pis[s];
        pol.at(s, 1, 0) = 1.0 - pis[s];
        pol.at(s, 1, 1) = pis[s];
    }
    pol.validate();
    return pol;
}

Eigen::Vector2d random_walk_stationary_closed_form(double p_u1, double p_u2, double pi_s1,
                                                   double pi_s2) {
    const double x = p_u1 + p_u2;
    const double n1 = x + pi_s1 * (1.0 - 2.0 * x);
    const double n2 = x + pi_s2 * (1.0 - 2.0 * x);
    const double t1 = (0.5 + n1) / 2.0;  // P(s1 -> s2)
    const double t2 = (0.5 + n2) / 2.0;  // P(s2 -> s1)
    return Eigen::Vector2d(t2, t1) / (t1 + t2);
}

void GridworldParams::validate() const {
    if (std::abs(success_prob + 2.0 * slip_prob - 1.0) > 1e-12)
        throw std::invalid_argument("GridworldParams: success_prob + 2*slip_prob must equal 1");
    if (!(wind_prob >= 0.0 && wind_prob <= 1.0))
        throw std::invalid_argument("GridworldParams: wind_prob must lie in [0,1]");
    auto in_grid = [](int c) { return c >= 0 && c < 9; };
    if (!in_grid(goal_cell)) throw std::invalid_argument("GridworldParams: goal cell off grid");
    for (int h : hazard_cells) {
        if (!in_grid(h)) throw std::invalid_argument("GridworldParams: hazard cell off grid");
        if (h == goal_cell) throw std::invalid_argument("GridworldParams: goal cell is a hazard");
    }
}

namespace {

// clipped single-step move; returns the cell itself for wall moves
int grid_move(int cell, GridAction dir) {
    int row = cell / 3, col = cell % 3;
    switch (dir) {
        case north: row += 1; break;
        case south: row -= 1; break;
        case east: col += 1; break;
        case west: col -= 1; break;
    }
    if (row < 0 || row > 2 || col < 0 || col > 2) return cell;
    return row * 3 + col;
}

// accumulated next-cell distribution for (cell, u, action)
Eigen::VectorXd grid_kernel(const GridworldParams& params, int cell, int u, GridAction action) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(9);
    if (u == 1) {
        if (action == east)
            out[cell] = 1.0;  // strong westward wind cancels the east move
        else
            out[grid_move(cell, west)] = 1.0;
        return out;
    }
    out[grid_move(cell, action)] += params.success_prob;
    out[grid_move(cell, east)] += params.slip_prob;
    out[grid_move(cell, west)] += params.slip_prob;
    return out;
}

}  // namespace

ConfoundedMdp build_gridworld(const GridworldParams& params) {
    params.validate();
    ConfoundedMdp mdp;
    mdp.n_s = 9;
    mdp.n_u = 2;
    mdp.n_a = 4;
    mdp.p = Eigen::MatrixXd::Zero(mdp.n_s * mdp.n_u * mdp.n_a, mdp.n_full());
    const double q[2] = {1.0 - params.wind_prob, params.wind_prob};
    for (int s = 0; s < 9; ++s)
        for (int u = 0; u < 2; ++u)
            for (int a = 0; a < 4; ++a) {
                const Eigen::VectorXd next =
                    grid_kernel(params, s, u, static_cast<GridAction>(a));
                for (int sp = 0; sp < 9; ++sp)
                    for (int up = 0; up < 2; ++up)
                        mdp.prob_at(s, u, a, sp, up) = next[sp] * q[up];
            }
    mdp.phi = Eigen::VectorXd::Zero(9);
    mdp.phi[params.goal_cell] = params.goal_reward;
    for (int h : params.hazard_cells) mdp.phi[h] = params.hazard_reward;
    mdp.validate();
    return mdp;
}

namespace {

// Relative value iteration for the long-run average criterion, on the
// half-lazy kernel (preserves optimal policies, guarantees convergence).
// Rewards depend on the current state only, so the greedy action
// maximizes the expected next value.
std::vector<int> relative_value_iteration(const std::vector<Eigen::MatrixXd>& kernels,
                                          const Eigen::VectorXd& reward, double tol = 1e-12,
                                          int max_iterations = 200000) {
    const int n = static_cast<int>(reward.size());
    const int n_a = static_cast<int>(kernels.size());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd next(n);
        for (int s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < n_a; ++a) {
                const double v = 0.5 * (kernels[a].row(s).dot(h) + h[s]);
                if (v > best) best = v;
            }
            next[s] = reward[s] + best;
        }
        next.array() -= next[0];
        const double span = (next - h).maxCoeff() - (next - h).minCoeff();
        h = next;
        if (span <= tol) {
            std::vector<int> policy(n);
            for (int s = 0; s < n; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                int arg = 0;
                for (int a = 0; a < n_a; ++a) {
                    const double v = kernels[a].row(s).dot(h);
                    if (v > best + 1e-12) {
                        best = v;
                        arg = a;
                    }
                }
                policy[s] = arg;
            }
            return policy;
        }
    }
    throw ConvergenceError("relative_value_iteration: no convergence");
}

}  // namespace

FullInfoPolicy gridworld_full_info_optimal(const ConfoundedMdp& mdp) {
    const int n = mdp.n_full();
    std::vector<Eigen::MatrixXd> kernels(mdp.n_a, Eigen::MatrixXd::Zero(n, n));
    Eigen::VectorXd reward(n);
    for (int s = 0; s < mdp.n_s; ++s)
        for (int u = 0; u < mdp.n_u; ++u) {
            const int x = s * mdp.n_u + u;
            reward[x] = mdp.phi[s];
            for (int a = 0; a < mdp.n_a; ++a)
                kernels[a].row(x) = mdp.p.row(mdp.row_index(s, u, a));
        }
    const auto greedy = relative_value_iteration(kernels, reward);
    FullInfoPolicy pol;
    pol.n_s = mdp.n_s;
    pol.n_u = mdp.n_u;
    pol.n_a = mdp.n_a;
    pol.pi = Eigen::MatrixXd::Zero(n, mdp.n_a);
    for (int x = 0; x < n; ++x) pol.pi(x, greedy[x]) = 1.0;
    return pol;
}

namespace {

ObservedPolicy observed_greedy(const ConfoundedMdp& mdp,
                               const std::vector<Eigen::MatrixXd>& kernels) {
    const auto greedy = relative_value_iteration(kernels, mdp.phi);
    ObservedPolicy pol;
    pol.pi = Eigen::MatrixXd::Zero(mdp.n_s, mdp.n_a);
    for (int s = 0; s < mdp.n_s; ++s) pol.pi(s, greedy[s]) = 1.0;
    return pol;
}

}  // namespace

ObservedPolicy gridworld_u0_optimal(const ConfoundedMdp& mdp) {
    std::vector<Eigen::MatrixXd> kernels(mdp.n_a, Eigen::MatrixXd::Zero(mdp.n_s, mdp.n_s));
    for (int s = 0; s < mdp.n_s; ++s)
        for (int a = 0; a < mdp.n_a; ++a)
            for (int sp = 0; sp < mdp.n_s; ++sp)
                for (int up = 0; up < mdp.n_u; ++up)
                    kernels[a](s, sp) += mdp.prob(s, 0, a, sp, up);
    return observed_greedy(mdp, kernels);
}

ObservedPolicy gridworld_marginal_optimal(const ConfoundedMdp& mdp,
                                          const GridworldParams& params) {
    const double q[2] = {1.0 - params.wind_prob, params.wind_prob};
    std::vector<Eigen::MatrixXd> kernels(mdp.n_a, Eigen::MatrixXd::Zero(mdp.n_s, mdp.n_s));
    for (int s = 0; s < mdp.n_s; ++s)
        for (int u = 0; u < mdp.n_u; ++u)
            for (int a = 0; a < mdp.n_a; ++a)
                for (int sp = 0; sp < mdp.n_s; ++sp)
                    for (int up = 0; up < mdp.n_u; ++up)
                        kernels[a](s, sp) += q[u] * mdp.prob(s, u, a, sp, up);
    return observed_greedy(mdp, kernels);
}

ObservedPolicy mixture_policy(double eta, const ObservedPolicy& base) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("mixture_policy: eta in [0,1]");
    ObservedPolicy out;
    out.pi = eta * base.pi +
             (1.0 - eta) * Eigen::MatrixXd::Constant(base.pi.rows(), base.pi.cols(),
                                                     1.0 / base.pi.cols());
    return out;
}

FullInfoPolicy epsilon_soft(const FullInfoPolicy& policy, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("epsilon_soft: epsilon in [0,1]");
    FullInfoPolicy out = policy;
    out.pi = (1.0 - epsilon) * policy.pi +
             epsilon * Eigen::MatrixXd::Constant(policy.pi.rows(), policy.pi.cols(),
                                                 1.0 / policy.pi.cols());
    return out;
}

}  // namespace cope
