#include "cope/occupancy.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cope/rng.hpp"

namespace cope {

void EmpiricalOccupancy::validate(double tol) const {
    double sum = 0.0;
    for (double v : p_jak.flat()) {
        if (v < -tol) throw std::logic_error("EmpiricalOccupancy: negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw std::logic_error("EmpiricalOccupancy: p_jak does not sum to 1");
    for (int k = 0; k < n_s; ++k) {
        double m = 0.0;
        for (int j = 0; j < n_s; ++j)
            for (int a = 0; a < n_a; ++a) m += p_jak(j, a, k);
        if (std::abs(m - p_k[k]) > tol)
            throw std::logic_error("EmpiricalOccupancy: inconsistent next-state marginal");
        if (p_k[k] > tol) {
            for (int j = 0; j < n_s; ++j)
                for (int a = 0; a < n_a; ++a)
                    if (std::abs(p_ja_given_k(j, a, k) * p_k[k] - p_jak(j, a, k)) > tol)
                        throw std::logic_error("EmpiricalOccupancy: conditional/joint mismatch");
        }
    }
    for (int j = 0; j < n_s; ++j) {
        if (std::abs(pi_b_marginal.row(j).sum() - 1.0) > tol)
            throw std::logic_error("EmpiricalOccupancy: behavior row does not sum to 1");
    }
}

Trajectory simulate_trajectory(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b, long steps,
                               uint64_t seed) {
    if (steps < 1) throw std::invalid_argument("simulate_trajectory: steps must be >= 1");
    if (pi_b.n_s != mdp.n_s || pi_b.n_u != mdp.n_u || pi_b.n_a != mdp.n_a)
        throw std::invalid_argument("simulate_trajectory: policy/mdp dimension mismatch");
    Trajectory traj;
    traj.seed = seed;
    traj.states.reserve(steps);
    traj.actions.reserve(steps);
    auto rng = make_rng(seed, 0);
    std::uniform_int_distribution<int> init(0, mdp.n_full() - 1);
    int full = init(rng);
    int s = full / mdp.n_u;
    int u = full % mdp.n_u;
    std::vector<double> row(mdp.n_full());
    std::vector<double> pol(mdp.n_a);
    for (long t = 0; t < steps; ++t) {
        traj.states.push_back(s);
        for (int i = 0; i < mdp.n_a; ++i) pol[i] = pi_b.pi(s * mdp.n_u + u, i);
        const int a = sample_index(pol.data(), mdp.n_a, rng);
        traj.actions.push_back(a);
        const auto p_row = mdp.p.row(mdp.row_index(s, u, a));
        for (int i = 0; i < mdp.n_full(); ++i) row[i] = p_row[i];
        const int next = sample_index(row.data(), mdp.n_full(), rng);
        s = next / mdp.n_u;
        u = next % mdp.n_u;
    }
    return traj;
}

namespace {

// Fills every derived field from p_jak. Zero-total behavior rows (a state
// seen only as the trajectory's final state) fall back to the uniform row,
// the (count+eps)/(total+eps*cells) limit.
void finalize_from_joint(EmpiricalOccupancy& occ) {
    const int n_s = occ.n_s, n_a = occ.n_a;
    occ.p_k = Eigen::VectorXd::Zero(n_s);
    occ.p_j = Eigen::VectorXd::Zero(n_s);
    Eigen::MatrixXd p_ja = Eigen::MatrixXd::Zero(n_s, n_a);
    for (int j = 0; j < n_s; ++j)
        for (int a = 0; a < n_a; ++a)
            for (int k = 0; k < n_s; ++k) {
                const double v = occ.p_jak(j, a, k);
                occ.p_k[k] += v;
                occ.p_j[j] += v;
                p_ja(j, a) += v;
            }
    occ.p_ja_given_k = Tensor3(n_s, n_a, n_s);
    for (int k = 0; k < n_s; ++k) {
        if (occ.p_k[k] <= 0.0) continue;
        for (int j = 0; j < n_s; ++j)
            for (int a = 0; a < n_a; ++a)
                occ.p_ja_given_k(j, a, k) = occ.p_jak(j, a, k) / occ.p_k[k];
    }
    occ.pi_b_marginal.resize(n_s, n_a);
    for (int j = 0; j < n_s; ++j) {
        const double row_total = p_ja.row(j).sum();
        if (row_total > 0.0)
            occ.pi_b_marginal.row(j) = p_ja.row(j) / row_total;
        else
            occ.pi_b_marginal.row(j).setConstant(1.0 / n_a);  // (0+eps)/(0+eps*n_a) limit
    }
}

}  // namespace

EmpiricalOccupancy estimate_occupancy(const Trajectory& traj, int n_s, int n_a,
                                      double smoothing) {
    const long t_len = traj.length();
    if (t_len < 2) throw std::invalid_argument("estimate_occupancy: trajectory shorter than 2");
    if (traj.actions.size() != traj.states.size())
        throw std::invalid_argument("estimate_occupancy: states/actions length mismatch");
    for (long t = 0; t < t_len; ++t) {
        const int s = traj.states[t];
        const int a = traj.actions[t];
        if (s < 0 || s >= n_s || a < 0 || a >= n_a)
            throw std::invalid_argument("estimate_occupancy: index out of range");
    }
    std::vector<bool> visited(n_s, false);
    for (long t = 0; t < t_len; ++t) visited[traj.states[t]] = true;
    std::vector<int> compact(n_s, -1);
    EmpiricalOccupancy occ;
    for (int s = 0; s < n_s; ++s)
        if (visited[s]) {
            compact[s] = static_cast<int>(occ.state_map.size());
            occ.state_map.push_back(s);
        }
    occ.n_s = static_cast<int>(occ.state_map.size());
    occ.n_a = n_a;
    occ.p_jak = Tensor3(occ.n_s, n_a, occ.n_s);
    occ.counts.assign(occ.p_jak.size(), 0);
    occ.total = t_len;
    // circular counting: the final step wraps to the initial state, so
    // the current- and next-state marginals coincide exactly. Without the
    // closure they differ by the endpoints, the estimating system is
    // inconsistent at O(1/T), and short trajectories have no iterates
    // inside the solver's feasibility tolerances.
    for (long t = 0; t < t_len; ++t) {
        const int j = compact[traj.states[t]];
        const int a = traj.actions[t];
        const int k = compact[traj.states[(t + 1) % t_len]];
        occ.counts[occ.p_jak.index(j, a, k)] += 1;
    }
    for (size_t i = 0; i < occ.counts.size(); ++i)
        occ.p_jak.flat()[i] = static_cast<double>(occ.counts[i]) / occ.total;
    (void)smoothing;  // raw frequencies; zero-total rows handled below
    finalize_from_joint(occ);
    return occ;
}

EmpiricalOccupancy population_occupancy(const ConfoundedMdp& mdp, const FullInfoPolicy& pi_b) {
    const auto stat = stationary_distribution(induced_chain(mdp, pi_b));
    EmpiricalOccupancy occ;
    occ.n_s = mdp.n_s;
    occ.n_a = mdp.n_a;
    occ.population = true;
    occ.total = 0;
    occ.state_map.resize(mdp.n_s);
    for (int s = 0; s < mdp.n_s; ++s) occ.state_map[s] = s;
    occ.p_jak = Tensor3(mdp.n_s, mdp.n_a, mdp.n_s);
    occ.counts.assign(occ.p_jak.size(), 0);
    for (int j = 0; j < mdp.n_s; ++j)
        for (int u = 0; u < mdp.n_u; ++u) {
            const double mass = stat.dist[j * mdp.n_u + u];
            for (int a = 0; a < mdp.n_a; ++a) {
                const double pa = mass * pi_b(j, u, a);
                if (pa == 0.0) continue;
                for (int k = 0; k < mdp.n_s; ++k) {
                    double pk = 0.0;
                    for (int up = 0; up < mdp.n_u; ++up) pk += mdp.prob(j, u, a, k, up);
                    occ.p_jak(j, a, k) += pa * pk;
                }
            }
        }
    finalize_from_joint(occ);
    return occ;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path,
                         const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_trajectory_csv: cannot open " + path);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "t,state,action\n";
    for (long t = 0; t < traj.length(); ++t)
        out << t << "," << traj.states[t] << "," << traj.actions[t] << "\n";
}

Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trajectory_csv: cannot open " + path);
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
        long t;
        int s, a;
        if (std::sscanf(line.c_str(), "%ld,%d,%d", &t, &s, &a) != 3)
            throw std::runtime_error("load_trajectory_csv: malformed line: " + line);
        traj.states.push_back(s);
        traj.actions.push_back(a);
    }
    return traj;
}

std::string occupancy_to_json(const EmpiricalOccupancy& occ) {
    nlohmann::json j;
    j["n_s"] = occ.n_s;
    j["n_a"] = occ.n_a;
    j["total"] = occ.total;
    j["population"] = occ.population;
    j["state_map"] = occ.state_map;
    j["counts"] = occ.counts;
    j["p_jak"] = occ.p_jak.flat();
    return j.dump();
}

EmpiricalOccupancy occupancy_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EmpiricalOccupancy occ;
    occ.n_s = j.at("n_s").get<int>();
    occ.n_a = j.at("n_a").get<int>();
    occ.total = j.at("total").get<long>();
    occ.population = j.at("population").get<bool>();
    occ.state_map = j.at("state_map").get<std::vector<int>>();
    occ.counts = j.at("counts").get<std::vector<long>>();
    occ.p_jak = Tensor3(occ.n_s, occ.n_a, occ.n_s);
    occ.p_jak.flat() = j.at("p_jak").get<std::vector<double>>();
    if (occ.p_jak.flat().size() != occ.counts.size())
        throw std::runtime_error("occupancy_from_json: inconsistent array sizes");
    finalize_from_joint(occ);
    return occ;
}

}  // namespace cope
