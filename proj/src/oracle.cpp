#include "cope/oracle.hpp"

#include <cmath>
#include <iostream>
#include <vector>

#include "cope/parallel.hpp"
#include "cope/rng.hpp"

namespace cope {

void OracleParams::validate() const {
    if (n_samples < 1 || n_polish < 1) throw std::invalid_argument("OracleParams: budgets >= 1");
}

namespace {

// minimum and maximum objective over every feasible point the repair
// trajectory passes through
struct Candidate {
    bool feasible = false;
    double lower = 0.0, upper = 0.0;
    MarginalWeights lower_g, upper_g;
};

Candidate evaluate_candidate(MarginalWeights g, const EmpiricalOccupancy& occ,
                             const ObservedPolicy& pi_e, const Eigen::VectorXd& phi,
                             const SensitivityBounds& bounds, const OracleParams& params) {
    Candidate out;
    auto record = [&](const MarginalWeights& point, double w_residual) {
        if (w_residual > params.w_residual_tol) return;
        if (!is_in_ambiguity_set(point, occ, bounds, params.feasibility_tol, params.moment_form)
                 .member)
            return;
        double value;
        try {
            value = objective(assemble(point, occ, pi_e, phi));
        } catch (const SingularSystemError&) {
            return;
        }
        if (!out.feasible || value < out.lower) {
            out.lower = value;
            out.lower_g = point;
        }
        if (!out.feasible || value > out.upper) {
            out.upper = value;
            out.upper_g = point;
        }
        out.feasible = true;
    };

    auto proj = project_to_moments(g, occ, bounds, params.moment_form);
    if (!proj) return out;
    g = *proj;
    for (int round = 0; round < params.n_polish; ++round) {
        const auto ws = w_step(g, occ, pi_e);
        record(g, ws.residual);
        if (ws.residual <= 1e-9) break;
        auto repaired = g_step(g, ws.w, occ, pi_e, bounds, params.moment_form);
        if (!repaired) repaired = g_step_soft(g, ws.w, occ, pi_e, bounds, params.moment_form);
        if (!repaired) break;
        g = *repaired;
        if (round == params.n_polish - 1) record(g, w_step(g, occ, pi_e).residual);
    }
    return out;
}

}  // namespace

OracleResult brute_force_bounds(const EmpiricalOccupancy& occ, const ObservedPolicy& pi_e,
                                const Eigen::VectorXd& phi, const SensitivityBounds& bounds,
                                const OracleParams& params) {
    params.validate();
    if (occ.n_s > 4)
        std::cerr << "brute_force_bounds: intended for |S| <= 4, got " << occ.n_s
                  << "; expect long runtimes\n";

    const long total = params.n_samples + 1;  // candidate 0 is the nominal point
    OracleResult result;
    result.n_evaluated = total;

    auto make_candidate = [&](long i) {
        MarginalWeights g;
        if (i == 0) {
            g = nominal_weights(occ.pi_b_marginal);
        } else {
            // corner-enriched proposals: the objective extremes sit on
            // low-dimensional box faces that uniform draws almost never
            // hit, and the L1 repair keeps corner coordinates pinned
            auto rng = make_rng(params.seed, static_cast<uint64_t>(i));
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            g = MarginalWeights(occ.n_s, occ.n_a, 1.0);
            for (int k = 0; k < occ.n_s; ++k)
                for (int a = 0; a < occ.n_a; ++a)
                    for (int j = 0; j < occ.n_s; ++j) {
                        const double coin = unif(rng);
                        const double frac = unif(rng);
                        double v;
                        if (coin < 0.35)
                            v = bounds.l(j, a);
                        else if (coin < 0.70)
                            v = bounds.m(j, a);
                        else
                            v = bounds.l(j, a) + frac * (bounds.m(j, a) - bounds.l(j, a));
                        g.g(k, a, j) = v;
                    }
        }
        return evaluate_candidate(std::move(g), occ, pi_e, phi, bounds, params);
    };

    // per-slot results, reduced serially: schedule-independent output
    std::vector<char> feasible(total, 0);
    std::vector<double> lowers(total, 0.0), uppers(total, 0.0);
    parallel_for(static_cast<int>(total), params.threads, [&](int i) {
        const Candidate cand = make_candidate(i);
        feasible[i] = cand.feasible ? 1 : 0;
        lowers[i] = cand.lower;
        uppers[i] = cand.upper;
    });

    long argmin = -1, argmax = -1;
    for (long i = 0; i < total; ++i) {
        if (!feasible[i]) continue;
        ++result.n_feasible;
        if (argmin < 0 || lowers[i] < lowers[argmin]) argmin = i;
        if (argmax < 0 || uppers[i] > uppers[argmax]) argmax = i;
    }
    if (argmin < 0) return result;  // empty partial identification set report
    result.found_feasible = true;
    result.lower = lowers[argmin];
    result.upper = uppers[argmax];
    result.lower_g = make_candidate(argmin).lower_g;
    result.upper_g = make_candidate(argmax).upper_g;
    return result;
}

}  // namespace cope
