#pragma once

#include <utility>
#include <vector>

#include "cope/mdp.hpp"

namespace cope {

/// Two-state confounded random walk. Stay probabilities from s1 under
/// action 1 are p_u1 (confounder u1) and 1/2 - p_u2 (confounder u2);
/// action 2 complements action 1 within each (s,u), and the s2 rows are
/// the (u,a)-swap of the s1 rows, so a uniform-over-actions policy walks
/// symmetrically (move probability exactly 1/2 from every (s,u)). The
/// confounder is redrawn from u_dist at every step, independent of
/// everything else.
struct RandomWalkParams {
    double p_u1 = 0.3;
    double p_u2 = 0.3;
    double pi_a1_given_u1 = 0.25;   // behavior: P(a=1 | s, u1); complement under u2
    double u_dist[2] = {0.5, 0.5};  // exogenous confounder draw

    void validate() const;
};

std::pair<ConfoundedMdp, FullInfoPolicy> build_random_walk(const RandomWalkParams& params);

/// Behavior policy with state-dependent confounding strength:
/// P(a=1|s_i,u1) = pi_si, complement under u2. pi_s1 = pi_s2 recovers the
/// build_random_walk behavior policy.
FullInfoPolicy random_walk_behavior(double pi_s1, double pi_s2);

/// Observed-state stationary distribution of the walk under
/// random_walk_behavior(pi_s1, pi_s2) with the uniform confounder draw,
/// in closed form:
///
///   P(s1 -> s2) = (1/2 + N(pi_s1)) / 2,  P(s2 -> s1) = (1/2 + N(pi_s2)) / 2,
///   N(pi) = x + pi (1 - 2x),  x = p_u1 + p_u2,
///
/// and the stationary point of the two-state chain follows by detailed
/// balance. Equal pi's give (1/2, 1/2) for every (p_u1, p_u2).
Eigen::Vector2d random_walk_stationary_closed_form(double p_u1, double p_u2, double pi_s1,
                                                   double pi_s2);

/// 3x3 windy gridworld with a binary exogenous wind confounder. Cells are
/// indexed row * 3 + col with row 0 the south edge and col 0 the west
/// edge; the default goal is the north-east corner and the default
/// hazards sit in the middle column. The exact figure layout is not fixed
/// by the reference description, so it is configuration, not a claim.
struct GridworldParams {
    double success_prob = 0.8;
    double slip_prob = 0.1;      // per lateral (east/west) slip
    double wind_prob = 0.5;      // P(u' = 1)
    int goal_cell = 8;
    std::vector<int> hazard_cells = {4, 7};
    double goal_reward = 1.0;
    double hazard_reward = -0.3;

    void validate() const;
};

/// Actions, in index order.
enum GridAction { north = 0, south = 1, east = 2, west = 3 };

ConfoundedMdp build_gridworld(const GridworldParams& params);

/// Average-reward-optimal policy on the full (s,u) space, by relative
/// value iteration; ties broken toward the lowest action index.
FullInfoPolicy gridworld_full_info_optimal(const ConfoundedMdp& mdp);

/// Optimal for the no-wind (u=0) dynamics, applied regardless of u.
ObservedPolicy gridworld_u0_optimal(const ConfoundedMdp& mdp);

/// Optimal for the exact marginalized transitions sum_u P(u) p(k|j,u,a).
ObservedPolicy gridworld_marginal_optimal(const ConfoundedMdp& mdp, const GridworldParams& params);

/// eta * base + (1 - eta) * uniform.
ObservedPolicy mixture_policy(double eta, const ObservedPolicy& base);

/// (1 - epsilon) * policy + epsilon / |A|; guarantees overlap for
/// behavior policies.
FullInfoPolicy epsilon_soft(const FullInfoPolicy& policy, double epsilon);

}  // namespace cope
