// Experiment runner: simulates confounded trajectories, estimates
// occupancies, and computes sensitivity bounds on policy value.
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "cope/environments.hpp"
#include "cope/oracle.hpp"
#include "cope/parallel.hpp"
#include "cope/robust_bounds.hpp"
#include "cope/rng.hpp"

using json = nlohmann::json;
using namespace cope;

namespace {

constexpr const char* kVersion = "cope 0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitNumericalError = 2;
constexpr int kExitOracleCheckFailed = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json default_config() {
    return json{
        {"environment",
         {{"type", "random_walk"},
          // random walk
          {"p_u1", 0.3},
          {"p_u2", 0.3},
          {"pi_a1_given_u1", 0.25},
          {"u_dist", {0.5, 0.5}},
          // gridworld
          {"success_prob", 0.8},
          {"slip_prob", 0.1},
          {"wind_prob", 0.5},
          {"goal_cell", 8},
          {"hazard_cells", {4, 7}},
          {"goal_reward", 1.0},
          {"hazard_reward", -0.3}}},
        {"behavior", {{"kind", "environment_default"}, {"epsilon", 0.1}}},
        {"evaluation", {{"kind", "uniform"}, {"eta", 0.55}, {"etas", {0.3, 0.55, 0.8}}}},
        {"phi", json()},  // reward override; null = environment rewards ([1,2] for the walk)
        {"trajectory", {{"T", 40000}, {"population", false}}},
        {"gamma_grid", {{"count", 25}, {"min", 1.10}, {"max", 5.47}, {"scale", "log"}}},
        {"pgd",
         {{"eta0", 0.5},
          {"kappa", 0.5},
          {"n_iters", 200},
          {"n_restarts", 10},
          {"repair_rounds", 3},
          {"step_from_repaired", false}}},
        {"oracle", {{"n_samples", 20000}, {"n_polish", 5}}},
        {"moment_form", "action_marginal"},
        {"consistency",
         {{"t_grid", {250, 1000, 4000, 10000}},
          {"replications", 10},
          {"gammas", {1.5, 3.0, 5.0}}}},
        {"seed", 0},
        {"threads", 1},
        {"out_dir", "out"}};
}

void merge_into(json& base, const json& user, const std::string& path) {
    if (!user.is_object())
        throw ConfigError("config: expected an object at " + (path.empty() ? "<root>" : path));
    for (const auto& [key, value] : user.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError("config: unknown key '" + here + "'");
        if (base[key].is_object() && value.is_object())
            merge_into(base[key], value, here);
        else
            base[key] = value;
    }
}

struct Resolved {
    json config;

    std::string out_dir() const { return config.at("out_dir").get<std::string>(); }
    uint64_t seed() const { return config.at("seed").get<uint64_t>(); }
    int threads() const { return config.at("threads").get<int>(); }
};

Resolved load_config(const std::string& config_path, long seed_override, int threads_override,
                     const std::string& out_override) {
    json resolved = default_config();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("config: cannot open " + config_path);
        json user;
        try {
            user = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config: parse error: ") + e.what());
        }
        merge_into(resolved, user, "");
    }
    // environment-variable overrides: output directory and thread count only
    if (const char* env = std::getenv("COPE_OUT_DIR")) resolved["out_dir"] = std::string(env);
    if (const char* env = std::getenv("COPE_THREADS")) resolved["threads"] = std::atoi(env);
    if (seed_override >= 0) resolved["seed"] = static_cast<uint64_t>(seed_override);
    if (threads_override > 0) resolved["threads"] = threads_override;
    if (!out_override.empty()) resolved["out_dir"] = out_override;
    return Resolved{std::move(resolved)};
}

MomentForm moment_form_of(const Resolved& cfg) {
    const auto name = cfg.config.at("moment_form").get<std::string>();
    if (name == "action_marginal") return MomentForm::action_marginal;
    if (name == "per_next_state_action") return MomentForm::per_next_state_action;
    throw ConfigError("config: moment_form must be action_marginal or per_next_state_action");
}

struct Experiment {
    ConfoundedMdp mdp;
    FullInfoPolicy behavior;
    ObservedPolicy evaluation;
    Eigen::VectorXd phi;
    bool population = false;
    long steps = 0;
};

ObservedPolicy evaluation_policy(const Resolved& cfg, const ConfoundedMdp& mdp,
                                 const GridworldParams& grid_params, double eta) {
    const auto kind = cfg.config.at("evaluation").at("kind").get<std::string>();
    if (kind == "uniform") return ObservedPolicy::uniform(mdp.n_s, mdp.n_a);
    if (kind == "u0_optimal_mixture")
        return mixture_policy(eta, gridworld_u0_optimal(mdp));
    if (kind == "marginal_optimal_mixture")
        return mixture_policy(eta, gridworld_marginal_optimal(mdp, grid_params));
    throw ConfigError("config: evaluation.kind must be uniform, u0_optimal_mixture, or "
                      "marginal_optimal_mixture");
}

Experiment build_experiment(const Resolved& cfg) {
    const auto& env = cfg.config.at("environment");
    const auto type = env.at("type").get<std::string>();
    Experiment exp;
    GridworldParams grid_params;
    if (type == "random_walk") {
        RandomWalkParams params;
        params.p_u1 = env.at("p_u1").get<double>();
        params.p_u2 = env.at("p_u2").get<double>();
        params.pi_a1_given_u1 = env.at("pi_a1_given_u1").get<double>();
        const auto u_dist = env.at("u_dist").get<std::vector<double>>();
        if (u_dist.size() != 2) throw ConfigError("config: u_dist must have two entries");
        params.u_dist[0] = u_dist[0];
        params.u_dist[1] = u_dist[1];
        auto built = build_random_walk(params);
        exp.mdp = std::move(built.first);
        exp.behavior = std::move(built.second);
        exp.phi = Eigen::VectorXd(2);
        exp.phi << 1.0, 2.0;
    } else if (type == "gridworld") {
        grid_params.success_prob = env.at("success_prob").get<double>();
        grid_params.slip_prob = env.at("slip_prob").get<double>();
        grid_params.wind_prob = env.at("wind_prob").get<double>();
        grid_params.goal_cell = env.at("goal_cell").get<int>();
        grid_params.hazard_cells = env.at("hazard_cells").get<std::vector<int>>();
        grid_params.goal_reward = env.at("goal_reward").get<double>();
        grid_params.hazard_reward = env.at("hazard_reward").get<double>();
        exp.mdp = build_gridworld(grid_params);
        const auto behavior_kind = cfg.config.at("behavior").at("kind").get<std::string>();
        if (behavior_kind != "environment_default")
            throw ConfigError("config: behavior.kind must be environment_default");
        exp.behavior = epsilon_soft(gridworld_full_info_optimal(exp.mdp),
                                    cfg.config.at("behavior").at("epsilon").get<double>());
        exp.phi = exp.mdp.phi;
    } else {
        throw ConfigError("config: environment.type must be random_walk or gridworld");
    }
    if (!cfg.config.at("phi").is_null()) {
        const auto phi = cfg.config.at("phi").get<std::vector<double>>();
        if (static_cast<int>(phi.size()) != exp.mdp.n_s)
            throw ConfigError("config: phi has the wrong length");
        exp.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size());
    }
    exp.mdp.phi = exp.phi;
    exp.evaluation = evaluation_policy(cfg, exp.mdp, grid_params,
                                       cfg.config.at("evaluation").at("eta").get<double>());
    exp.population = cfg.config.at("trajectory").at("population").get<bool>();
    exp.steps = cfg.config.at("trajectory").at("T").get<long>();
    return exp;
}

PgdParams pgd_params(const Resolved& cfg) {
    const auto& p = cfg.config.at("pgd");
    PgdParams params;
    params.eta0 = p.at("eta0").get<double>();
    params.kappa = p.at("kappa").get<double>();
    params.n_iters = p.at("n_iters").get<int>();
    params.n_restarts = p.at("n_restarts").get<int>();
    params.repair_rounds = p.at("repair_rounds").get<int>();
    params.step_from_repaired = p.at("step_from_repaired").get<bool>();
    params.seed = cfg.seed();
    params.moment_form = moment_form_of(cfg);
    params.threads = cfg.threads();
    params.validate();
    return params;
}

OracleParams oracle_params(const Resolved& cfg) {
    const auto& p = cfg.config.at("oracle");
    OracleParams params;
    params.n_samples = p.at("n_samples").get<long>();
    params.n_polish = p.at("n_polish").get<int>();
    params.seed = cfg.seed();
    params.moment_form = moment_form_of(cfg);
    params.threads = cfg.threads();
    params.validate();
    return params;
}

std::vector<double> gamma_grid(const Resolved& cfg) {
    const auto& g = cfg.config.at("gamma_grid");
    const int count = g.at("count").get<int>();
    const double lo = g.at("min").get<double>();
    const double hi = g.at("max").get<double>();
    const auto scale = g.at("scale").get<std::string>();
    if (count < 1 || lo < 1.0 || hi < lo)
        throw ConfigError("config: gamma_grid must satisfy count >= 1 and 1 <= min <= max");
    std::vector<double> grid;
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid.push_back(scale == "log" ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                                      : lo + t * (hi - lo));
    }
    return grid;
}

EmpiricalOccupancy make_occupancy(const Experiment& exp, uint64_t seed, long steps) {
    if (exp.population) return population_occupancy(exp.mdp, exp.behavior);
    const auto traj = simulate_trajectory(exp.mdp, exp.behavior, steps, seed);
    return estimate_occupancy(traj, exp.mdp.n_s, exp.mdp.n_a);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::filesystem::path prepare_out_dir(const Resolved& cfg) {
    std::filesystem::path dir(cfg.out_dir());
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "resolved_config.json");
    out << cfg.config.dump(2) << "\n";
    return dir;
}

void write_header(std::ofstream& out, const Resolved& cfg) {
    out << "# version: " << kVersion << "\n";
    out << "# config: " << cfg.config.dump() << "\n";
}

json weights_to_json(const MarginalWeights& g) {
    return json{{"n_s", g.n_s()}, {"n_a", g.n_a()}, {"data", g.g.flat()}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Resolved& cfg) {
    const auto exp = build_experiment(cfg);
    const auto dir = prepare_out_dir(cfg);
    const auto traj = simulate_trajectory(exp.mdp, exp.behavior, exp.steps, cfg.seed());
    save_trajectory_csv(traj, (dir / "trajectory.csv").string(),
                        std::string(kVersion) + " config: " + cfg.config.dump());
    const auto occ = estimate_occupancy(traj, exp.mdp.n_s, exp.mdp.n_a);
    std::ofstream occ_out(dir / "occupancy.json");
    occ_out << occupancy_to_json(occ) << "\n";

    std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << traj.length()
              << " steps)\n";
    std::cout << "state frequencies:";
    for (int s = 0; s < occ.n_s; ++s) std::cout << " " << fmt(occ.p_j[s]);
    std::cout << "\nempirical behavior policy (rows = states):\n";
    for (int s = 0; s < occ.n_s; ++s) {
        std::cout << "  state " << occ.state_map[s] << ":";
        for (int a = 0; a < occ.n_a; ++a) std::cout << " " << fmt(occ.pi_b_marginal(s, a));
        std::cout << "\n";
    }
    return kExitOk;
}

int run_bounds_pipeline(const Resolved& cfg, const Experiment& exp,
                        const std::vector<double>& gammas, const std::string& csv_name,
                        const std::string& witness_name) {
    const auto dir = prepare_out_dir(cfg);
    const auto occ = make_occupancy(exp, cfg.seed(), exp.steps);
    const auto params = pgd_params(cfg);

    // sweep with per-gamma timing, then the monotone envelope
    std::vector<BoundsResult> results;
    std::vector<long> wall_ms;
    std::vector<MarginalWeights> warm_lower, warm_upper;
    for (double gamma : gammas) {
        const auto start = std::chrono::steady_clock::now();
        auto res =
            bounds_at_gamma(occ, exp.evaluation, exp.phi, gamma, params, warm_lower, warm_upper);
        wall_ms.push_back(std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count());
        if (res.feasible) {
            warm_lower = {res.lower_g};
            warm_upper = {res.upper_g};
        }
        results.push_back(std::move(res));
    }
    bool have = false;
    double lo_env = 0.0, hi_env = 0.0;
    for (auto& res : results) {
        if (!res.feasible) continue;
        if (have) {
            lo_env = std::min(lo_env, res.lower_raw);
            hi_env = std::max(hi_env, res.upper_raw);
        } else {
            lo_env = res.lower_raw;
            hi_env = res.upper_raw;
            have = true;
        }
        res.lower = lo_env;
        res.upper = hi_env;
    }

    std::ofstream out(dir / csv_name);
    write_header(out, cfg);
    out << "gamma,lower,upper,lower_raw,upper_raw,naive_estimate,feasible,wall_time_ms\n";
    json witnesses = json::array();
    for (size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << fmt(r.gamma) << "," << fmt(r.lower) << "," << fmt(r.upper) << ","
            << fmt(r.lower_raw) << "," << fmt(r.upper_raw) << "," << fmt(r.naive) << ","
            << (r.feasible ? 1 : 0) << "," << wall_ms[i] << "\n";
        json entry{{"gamma", r.gamma}, {"feasible", r.feasible}, {"naive", r.naive}};
        if (r.feasible) {
            entry["lower"] = r.lower_raw;
            entry["upper"] = r.upper_raw;
            entry["lower_g"] = weights_to_json(r.lower_g);
            entry["upper_g"] = weights_to_json(r.upper_g);
        } else {
            entry["error"] = r.error;
        }
        witnesses.push_back(std::move(entry));
    }
    std::ofstream wout(dir / witness_name);
    wout << json{{"version", kVersion}, {"config", cfg.config}, {"results", witnesses}}.dump(2)
         << "\n";
    std::cout << "wrote " << (dir / csv_name).string() << "\n";
    return kExitOk;
}

int cmd_bounds(const Resolved& cfg) {
    const auto exp = build_experiment(cfg);
    return run_bounds_pipeline(cfg, exp, gamma_grid(cfg), "bounds.csv", "witnesses.json");
}

int cmd_consistency(const Resolved& cfg) {
    const auto exp = build_experiment(cfg);
    const auto dir = prepare_out_dir(cfg);
    const auto& cc = cfg.config.at("consistency");
    const auto t_grid = cc.at("t_grid").get<std::vector<long>>();
    const int reps = cc.at("replications").get<int>();
    const auto gammas = cc.at("gammas").get<std::vector<double>>();
    if (t_grid.empty() || reps < 1) throw ConfigError("config: consistency grid is empty");

    auto base_params = pgd_params(cfg);
    base_params.threads = 1;  // replications parallelize instead

    struct Task {
        long steps;
        int rep;
        double gamma;
        double upper = std::numeric_limits<double>::quiet_NaN();
        bool ok = false;
    };
    std::vector<Task> tasks;
    for (double gamma : gammas)
        for (long steps : t_grid)
            for (int rep = 0; rep < reps; ++rep) tasks.push_back({steps, rep, gamma});

    parallel_for(static_cast<int>(tasks.size()), cfg.threads(), [&](int i) {
        auto& task = tasks[i];
        auto params = base_params;
        params.seed = derive_seed(cfg.seed(), static_cast<uint64_t>(task.rep));
        try {
            const auto occ = make_occupancy(exp, params.seed, task.steps);
            const auto bounds = bounds_for_occupancy(task.gamma, occ);
            const auto hi =
                pgd_extremum(Direction::maximize, occ, exp.evaluation, exp.phi, bounds, params);
            task.upper = hi.value;
            task.ok = true;
        } catch (const EmptyAmbiguitySetError&) {
        } catch (const SingularSystemError&) {
        }
    });

    // reference: the largest-T estimate for the same replication and gamma
    const long t_ref = *std::max_element(t_grid.begin(), t_grid.end());
    auto find_ref = [&](int rep, double gamma) {
        for (const auto& t : tasks)
            if (t.rep == rep && t.gamma == gamma && t.steps == t_ref && t.ok) return t.upper;
        return std::numeric_limits<double>::quiet_NaN();
    };

    std::ofstream out(dir / "consistency.csv");
    write_header(out, cfg);
    out << "T,replication,gamma,upper,upper_minus_reference\n";
    for (const auto& t : tasks) {
        if (!t.ok) continue;
        out << t.steps << "," << t.rep << "," << fmt(t.gamma) << "," << fmt(t.upper) << ","
            << fmt(t.upper - find_ref(t.rep, t.gamma)) << "\n";
    }
    std::cout << "wrote " << (dir / "consistency.csv").string() << "\n";
    return kExitOk;
}

int cmd_oracle_check(const Resolved& cfg) {
    const auto exp = build_experiment(cfg);
    const auto dir = prepare_out_dir(cfg);
    const auto occ = make_occupancy(exp, cfg.seed(), exp.steps);
    const auto params = pgd_params(cfg);
    const auto oparams = oracle_params(cfg);
    const auto gammas = gamma_grid(cfg);

    std::ofstream out(dir / "oracle_check.csv");
    write_header(out, cfg);
    out << "gamma,pgd_lower,pgd_upper,oracle_lower,oracle_upper,rel_gap_lower,rel_gap_upper,"
           "contained,pass\n";
    bool all_pass = true;
    for (double gamma : gammas) {
        const auto bounds = bounds_for_occupancy(gamma, occ);
        const auto res = bounds_at_gamma(occ, exp.evaluation, exp.phi, gamma, params);
        const auto oracle = brute_force_bounds(occ, exp.evaluation, exp.phi, bounds, oparams);
        if (!res.feasible || !oracle.found_feasible) {
            out << fmt(gamma) << ",,,,,,,0,0\n";
            all_pass = false;
            continue;
        }
        const double gap_lo =
            std::abs(res.lower_raw - oracle.lower) / std::max(std::abs(oracle.lower), 1e-12);
        const double gap_hi =
            std::abs(res.upper_raw - oracle.upper) / std::max(std::abs(oracle.upper), 1e-12);
        const bool contained =
            res.lower_raw >= oracle.lower - 1e-6 && res.upper_raw <= oracle.upper + 1e-6;
        const bool pass = gap_lo <= 0.05 && gap_hi <= 0.05 && contained;
        all_pass = all_pass && pass;
        out << fmt(gamma) << "," << fmt(res.lower_raw) << "," << fmt(res.upper_raw) << ","
            << fmt(oracle.lower) << "," << fmt(oracle.upper) << "," << fmt(gap_lo) << ","
            << fmt(gap_hi) << "," << (contained ? 1 : 0) << "," << (pass ? 1 : 0) << "\n";
    }
    std::cout << "wrote " << (dir / "oracle_check.csv").string() << "\n";
    std::cout << (all_pass ? "oracle check: PASS" : "oracle check: FAIL") << "\n";
    return all_pass ? kExitOk : kExitOracleCheckFailed;
}

int cmd_gridworld_sweep(const Resolved& cfg) {
    Resolved base = cfg;
    base.config["environment"]["type"] = "gridworld";
    const auto etas = cfg.config.at("evaluation").at("etas").get<std::vector<double>>();
    const auto dir = prepare_out_dir(base);

    std::ofstream summary(dir / "gridworld_sweep_summary.csv");
    write_header(summary, base);
    summary << "kind,eta,exact_value,results_file\n";
    for (const std::string kind : {"u0_optimal_mixture", "marginal_optimal_mixture"}) {
        for (double eta : etas) {
            Resolved run = base;
            run.config["evaluation"]["kind"] = kind;
            run.config["evaluation"]["eta"] = eta;
            const auto exp = build_experiment(run);
            const double exact =
                policy_value(exp.mdp, FullInfoPolicy::from_observed(exp.evaluation, exp.mdp.n_u));
            char name[128];
            std::snprintf(name, sizeof(name), "gridworld_%s_eta%.2f.csv",
                          kind == "u0_optimal_mixture" ? "u0" : "marginal", eta);
            run_bounds_pipeline(run, exp, gamma_grid(run), name,
                                std::string(name) + ".witnesses.json");
            summary << kind << "," << fmt(eta) << "," << fmt(exact) << "," << name << "\n";
        }
    }
    std::cout << "wrote " << (dir / "gridworld_sweep_summary.csv").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-identification bounds for off-policy evaluation under "
                 "unobserved confounding"};
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    long seed_override = -1;
    int threads_override = 0;
    std::string out_override;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed_override, "seed override");
    app.add_option("--threads", threads_override, "worker thread cap");
    app.add_option("--out", out_override, "output directory override");

    app.add_subcommand("simulate", "write a trajectory CSV and its occupancy");
    app.add_subcommand("bounds", "gamma sweep of the bounds on one dataset");
    app.add_subcommand("consistency", "upper-bound convergence study over T");
    app.add_subcommand("oracle-check", "gradient solver vs brute-force reference");
    app.add_subcommand("gridworld-sweep", "mixture-policy sweeps on the gridworld");
    app.require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config(config_path, seed_override, threads_override, out_override);
        if (app.got_subcommand("simulate")) return cmd_simulate(cfg);
        if (app.got_subcommand("bounds")) return cmd_bounds(cfg);
        if (app.got_subcommand("consistency")) return cmd_consistency(cfg);
        if (app.got_subcommand("oracle-check")) return cmd_oracle_check(cfg);
        if (app.got_subcommand("gridworld-sweep")) return cmd_gridworld_sweep(cfg);
        return kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
}
