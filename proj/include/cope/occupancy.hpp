#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cope/mdp.hpp"
#include "cope/tensor.hpp"

namespace cope {

/// One observed trajectory: states and actions only, u discarded.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;
    uint64_t seed = 0;

    long length() const { return static_cast<long>(states.size()); }
};

/// Stationary state-action-next-state occupancy estimates, on the set of
/// visited states (compacted; state_map maps compact index -> original).
///
/// Unvisited next states are dropped rather than smoothed: smoothing would
/// invent transitions, and under ergodicity every state is visited for
/// large T. A visited state with no outgoing transition (only possible for
/// the final state of the trajectory) gets a uniform behavior row.
struct EmpiricalOccupancy {
    int n_s = 0;  // compacted state count
    int n_a = 0;
    std::vector<long> counts;       // N(j,a,k), same layout as p_jak
    Tensor3 p_jak;                  // joint (j,a,k)
    Tensor3 p_ja_given_k;           // conditional (j,a | k), stored (j,a,k)
    Eigen::VectorXd p_k;            // marginal over next state
    Eigen::VectorXd p_j;            // marginal over current state (the b vector)
    Eigen::MatrixXd pi_b_marginal;  // behavior policy on observed states (j,a)
    long total = 0;                 // number of transitions; 0 for population input
    bool population = false;
    std::vector<int> state_map;     // compact -> original state index

    long count(int j, int a, int k) const { return counts[p_jak.index(j, a, k)]; }
    void validate(double tol = 1e-12) const;
};

/// Samples an observed trajectory of T steps from the full-information
/// chain, discarding u. The initial full state is uniform. Identical
/// (seed) input gives a bitwise-identical trajectory.
Trajectory simulate_trajectory(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b, long steps,
                               uint64_t seed);

/// Transition counts over consecutive pairs, normalized. `smoothing` is
/// only applied to zero-total behavior rows; the default 0 keeps raw
/// frequencies. Throws for trajectories shorter than 2.
EmpiricalOccupancy estimate_occupancy(const Trajectory& traj, int n_s, int n_a,
                                      double smoothing = 0.0);

/// Exact population counterpart: p(j,a,k) from the stationary distribution
/// of the behavior chain. No compaction; `population` is set.
EmpiricalOccupancy population_occupancy(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b);

void save_trajectory_csv(const Trajectory& traj, const std::string& path,
                         const std::string& header_comment = "");
Trajectory load_trajectory_csv(const std::string& path);

std::string occupancy_to_json(const EmpiricalOccupancy& occ);
EmpiricalOccupancy occupancy_from_json(const std::string& text);

}  // namespace cope
