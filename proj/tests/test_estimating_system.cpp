#include <doctest.h>

#include <random>

#include "cope/environments.hpp"
#include "cope/estimating_system.hpp"
#include "cope/robust_bounds.hpp"
#include "cope/rng.hpp"

using namespace cope;

namespace {

EmpiricalOccupancy single_state_occ() {
    Trajectory traj;
    traj.states = {0, 0, 0};
    traj.actions = {0, 0, 0};
    return estimate_occupancy(traj, 1, 1);
}

struct RandomWalkFixture {
    ConfoundedMdp mdp;
    FullInfoPolicy behavior;
    ObservedPolicy pi_e = ObservedPolicy::uniform(2, 2);
    EmpiricalOccupancy occ;
    Eigen::VectorXd phi;

    explicit RandomWalkFixture(double p1 = 0.3, double p2 = 0.3, double pi_u1 = 0.25) {
        RandomWalkParams params;
        params.p_u1 = p1;
        params.p_u2 = p2;
        params.pi_a1_given_u1 = pi_u1;
        auto built = build_random_walk(params);
        mdp = std::move(built.first);
        behavior = std::move(built.second);
        occ = population_occupancy(mdp, behavior);
        phi = Eigen::VectorXd(2);
        phi << 1.0, 2.0;
        mdp.phi = phi;
    }
};

// feasible point for gradient tests: random in the box, then projected
// onto the moment constraints
MarginalWeights random_moment_feasible(const RandomWalkFixture& fix, double gamma, uint64_t seed) {
    const auto bounds = bounds_from_gamma(gamma, fix.occ.pi_b_marginal);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MarginalWeights g(2, 2);
    for (int k = 0; k < 2; ++k)
        for (int a = 0; a < 2; ++a)
            for (int j = 0; j < 2; ++j)
                g.g(k, a, j) = bounds.l(j, a) + unif(rng) * (bounds.m(j, a) - bounds.l(j, a));
    auto projected = project_to_moments(g, fix.occ, bounds, MomentForm::action_marginal);
    REQUIRE(projected.has_value());
    return *projected;
}

}  // namespace

TEST_SUITE("estimating-system") {

TEST_CASE("single-state system vanishes at the nominal weights") {
    const auto occ = single_state_occ();
    const auto g = nominal_weights(occ.pi_b_marginal);
    Eigen::VectorXd phi = Eigen::VectorXd::Constant(1, 5.0);
    const auto sys = assemble(g, occ, ObservedPolicy::uniform(1, 1), phi);
    CHECK(std::abs(sys.a(0, 0)) <= 1e-12);
    const auto w = solve_w(sys);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(objective(sys) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("matrix entries match their defining sums") {
    RandomWalkFixture fix;
    const auto g = true_marginal_weights(fix.mdp, fix.behavior);
    const auto sys = assemble(g, fix.occ, fix.pi_e, fix.phi);
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) {
            double expected = k == j ? -fix.occ.p_k[k] : 0.0;
            for (int a = 0; a < 2; ++a)
                expected += fix.occ.p_jak(j, a, k) * fix.pi_e.pi(j, a) * g.g(k, a, j);
            CHECK(sys.a(k, j) == doctest::Approx(expected).epsilon(1e-12));
        }
    CHECK(sys.b.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("true marginal weights solve the population estimating equation") {
    RandomWalkFixture fix(0.2, 0.4);
    const auto g = true_marginal_weights(fix.mdp, fix.behavior);
    const auto sys = assemble(g, fix.occ, fix.pi_e, fix.phi);
    const auto w_true = true_density_ratio(fix.mdp, fix.behavior, fix.pi_e);
    CHECK((sys.a * w_true).lpNorm<1>() <= 1e-10);
    CHECK(objective(sys) ==
          doctest::Approx(policy_value(fix.mdp, FullInfoPolicy::from_observed(fix.pi_e, 2)))
              .epsilon(1e-10));
}

TEST_CASE("rank drops by exactly one at feasible weights") {
    RandomWalkFixture fix;
    const auto g = true_marginal_weights(fix.mdp, fix.behavior);
    const auto sys = assemble(g, fix.occ, fix.pi_e, fix.phi);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.a);
    const auto& sv = svd.singularValues();
    CHECK(sv[sv.size() - 1] <= 1e-8);
    CHECK(sv[sv.size() - 2] >= 1e-8);
}

TEST_CASE("nominal weights on unconfounded data recover the density ratio") {
    RandomWalkFixture fix(0.3, 0.3, 0.5);  // unconfounded behavior
    const auto g = nominal_weights(fix.occ.pi_b_marginal);
    const auto sys = assemble(g, fix.occ, fix.pi_e, fix.phi);
    const auto w = solve_w(sys);
    const auto w_true = true_density_ratio(fix.mdp, fix.behavior, fix.pi_e);
    CHECK((w - w_true).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(fix.occ.p_j.dot(w) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("the replaced row does not matter for feasible weights") {
    RandomWalkFixture fix(0.15, 0.35);
    const auto g = true_marginal_weights(fix.mdp, fix.behavior);
    const auto w_last = solve_w(assemble(g, fix.occ, fix.pi_e, fix.phi));
    for (int row = 0; row < 2; ++row) {
        const auto w = solve_w(assemble(g, fix.occ, fix.pi_e, fix.phi, row));
        CHECK((w - w_last).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("constant rewards pin the objective and zero the gradient") {
    RandomWalkFixture fix;
    Eigen::VectorXd phi_const = Eigen::VectorXd::Constant(2, 2.5);
    const auto g = random_moment_feasible(fix, 3.0, 1);
    const auto sys = assemble(g, fix.occ, fix.pi_e, phi_const);
    CHECK(objective(sys) == doctest::Approx(2.5).epsilon(1e-10));
    const auto grad = gradient(sys);
    for (double v : grad.flat()) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("analytic gradient matches central finite differences") {
    RandomWalkFixture fix;
    const double h = 1e-6;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto g = random_moment_feasible(fix, 3.0, 100 + seed);
        const auto grad = gradient(assemble(g, fix.occ, fix.pi_e, fix.phi));
        for (size_t i = 0; i < g.g.flat().size(); ++i) {
            auto gp = g;
            gp.g.flat()[i] += h;
            auto gm = g;
            gm.g.flat()[i] -= h;
            const double fd = (objective(assemble(gp, fix.occ, fix.pi_e, fix.phi)) -
                               objective(assemble(gm, fix.occ, fix.pi_e, fix.phi))) /
                              (2 * h);
            const double an = grad.flat()[i];
            if (std::abs(fd) > 1e-10 || std::abs(an) > 1e-10)
                CHECK(std::abs(fd - an) / std::max(std::abs(fd), 1e-10) <= 1e-4);
        }
    }
}

TEST_CASE("gradient vanishes off the support") {
    // empirical gridworld data at modest length has unvisited (j,a,k) cells
    auto mdp = build_gridworld(GridworldParams{});
    const auto behavior = epsilon_soft(gridworld_full_info_optimal(mdp), 0.1);
    const auto traj = simulate_trajectory(mdp, behavior, 20000, 3);
    const auto occ = estimate_occupancy(traj, 9, 4);
    const auto g = nominal_weights(occ.pi_b_marginal);
    const auto pi_e = ObservedPolicy::uniform(9, 4);
    const auto sys = assemble(g, occ, pi_e, mdp.phi);
    const auto grad = gradient(sys);
    bool saw_zero_cell = false;
    for (int k = 0; k < occ.n_s; ++k)
        for (int a = 0; a < occ.n_a; ++a)
            for (int j = 0; j < occ.n_s; ++j)
                if (occ.p_jak(j, a, k) == 0.0) {
                    saw_zero_cell = true;
                    CHECK(grad(k, a, j) == 0.0);
                }
    CHECK(saw_zero_cell);
}

TEST_CASE("assembly is affine in g") {
    RandomWalkFixture fix;
    const auto g1 = random_moment_feasible(fix, 3.0, 7);
    const auto g2 = random_moment_feasible(fix, 3.0, 8);
    MarginalWeights sum(2, 2);
    for (size_t i = 0; i < sum.g.flat().size(); ++i)
        sum.g.flat()[i] = g1.g.flat()[i] + g2.g.flat()[i];
    const auto a1 = estimating_matrix(g1, fix.occ, fix.pi_e);
    const auto a2 = estimating_matrix(g2, fix.occ, fix.pi_e);
    const auto a12 = estimating_matrix(sum, fix.occ, fix.pi_e);
    const Eigen::MatrixXd diff = a1 + a2 - a12;
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) {
            const double expected = k == j ? -fix.occ.p_k[k] : 0.0;
            CHECK(diff(k, j) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("singular systems are reported") {
    RandomWalkFixture fix;
    auto sys = assemble(nominal_weights(fix.occ.pi_b_marginal), fix.occ, fix.pi_e, fix.phi);
    sys.a_tilde.row(0) = sys.a_tilde.row(1);  // force degeneracy
    CHECK_THROWS_AS(solve_w(sys), SingularSystemError);
}

TEST_CASE("feasibility value is zero exactly on consistent ratios") {
    RandomWalkFixture fix;
    const auto bounds = bounds_from_gamma(3.0, fix.occ.pi_b_marginal);
    const auto w_true = true_density_ratio(fix.mdp, fix.behavior, fix.pi_e);
    const auto res = feasibility_value(w_true, fix.occ, fix.pi_e, bounds);
    CHECK(res.ambiguity_set_nonempty);
    CHECK(res.value <= 1e-8);

    const auto occ1 = single_state_occ();
    const auto res1 = feasibility_value(Eigen::VectorXd::Ones(1), occ1,
                                        ObservedPolicy::uniform(1, 1),
                                        bounds_from_gamma(2.0, occ1.pi_b_marginal));
    CHECK(res1.value <= 1e-10);
}

TEST_CASE("inconsistent ratios are rejected at gamma = 1") {
    // confounded gridworld: the all-ones ratio is not stationary for the
    // nominal weights, and gamma = 1 pins g to nominal
    auto mdp = build_gridworld(GridworldParams{});
    const auto behavior = epsilon_soft(gridworld_full_info_optimal(mdp), 0.1);
    const auto occ = population_occupancy(mdp, behavior);
    const auto bounds = bounds_from_gamma(1.0, occ.pi_b_marginal);
    const auto res = feasibility_value(Eigen::VectorXd::Ones(9), occ,
                                       ObservedPolicy::uniform(9, 4), bounds);
    CHECK(res.ambiguity_set_nonempty);
    CHECK(res.value > 1e-3);
}

TEST_CASE("empty ambiguity sets are reported distinctly") {
    // strict per-(k,a) moments at gamma = 1 on confounded gridworld data:
    // the box is a single point that violates them
    auto mdp = build_gridworld(GridworldParams{});
    const auto behavior = epsilon_soft(gridworld_full_info_optimal(mdp), 0.1);
    const auto occ = population_occupancy(mdp, behavior);
    const auto bounds = bounds_from_gamma(1.0, occ.pi_b_marginal);
    const auto res =
        feasibility_value(Eigen::VectorXd::Ones(9), occ, ObservedPolicy::uniform(9, 4), bounds,
                          MomentForm::per_next_state_action);
    CHECK_FALSE(res.ambiguity_set_nonempty);
}

}  // TEST_SUITE
