// swarmsynth command line: model-based swarm behavior design.
//
// Every subcommand assembles a JSON run configuration (config file first,
// flags override) and hands it to the shared library through the C API.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "swarmsynth.h"

namespace {

using nlohmann::json;

struct CommonOpts {
    std::string config_path;
    std::string task = "A";
    std::optional<unsigned long long> seed;
    std::optional<int> jobs;
    std::string out = "runs/out";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file; flags override its values");
    cmd->add_option("--task", o.task, "Task: A, B1, B2 or C")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed (default: SWARM_SYNTH_SEED or 0)");
    cmd->add_option("--jobs", o.jobs, "Max concurrent simulation workers");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

json base_config(const CommonOpts& o, const CLI::App* cmd) {
    json j = json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw CLI::ValidationError("--config", "cannot open " + o.config_path);
        in >> j;
    }
    if (cmd->count("--task") || !j.contains("task")) j["task"] = o.task;
    if (o.seed) {
        j["seed"] = *o.seed;
    } else if (!j.contains("seed")) {
        const char* env = std::getenv("SWARM_SYNTH_SEED");
        j["seed"] = env ? std::strtoull(env, nullptr, 10) : 0ull;
    }
    if (o.jobs) j["jobs"] = *o.jobs;
    if (cmd->count("--out") || !j.contains("out")) j["out"] = o.out;
    return j;
}

template <typename T>
void set_if(const CLI::App* cmd, const std::string& flag, json& j, const char* section,
            const char* key, const std::optional<T>& v) {
    if (cmd->count(flag) && v) j[section][key] = *v;
}

int run_stage(const json& config, const char* stage) {
    ss_session* session = nullptr;
    ss_status st = ss_session_create(config.dump().c_str(), &session);
    if (st != SS_OK) {
        std::cerr << "swarmsynth: " << ss_status_name(st) << ": " << ss_last_error() << '\n';
        return st == SS_ERR_CONFIG || st == SS_ERR_ARGUMENT ? 1 : 2;
    }
    st = ss_run_stage(session, stage);
    ss_session_destroy(session);
    if (st != SS_OK) {
        std::cerr << "swarmsynth " << stage << ": " << ss_status_name(st) << ": " << ss_last_error()
                  << '\n';
        return st == SS_ERR_CONFIG || st == SS_ERR_ARGUMENT ? 1 : 2;
    }
    return 0;
}

const char* kFooter =
    "Published task parameters (used as defaults):\n"
    "  A : f_c 0.5 Hz, m_max 7, T 200 s, states 8, actions move/stay\n"
    "  B1: f_n 0.5 Hz, q 4, v_cmd 0.5 m/s, T 200 s, states 16, 8 turn rates\n"
    "  B2: f_n 0.5 Hz, q 4, v_mean 0.5 m/s, t1 1 s, t2 1 s, T 200 s\n"
    "  C : f(0) 15, f_n 0.1 Hz, T 500 s, e_f 0.1, t_c 10 s, e_n 0.02,\n"
    "      30 states, f_max 5\n"
    "  model 1: hidden 3x30 at lr 1e-5 (A/B1/B2), 3x100 at lr 1e-6 (C)\n"
    "  training data: 500 runs, 2 Hz logging, 20x20 m arena, n in [1,30]\n"
    "  ([1,20] for C); policy optimization floor epsilon 0.01\n"
    "Environment: SWARM_SYNTH_SEED provides the seed when --seed is absent.\n";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"swarmsynth: design, optimize and verify swarm behaviors from models"};
    app.require_subcommand(1);
    app.footer(kFooter);

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Simulate random-policy runs into a dataset");
    CommonOpts gen_o;
    add_common(gen, gen_o);
    std::optional<int> gen_runs, gen_nmin, gen_nmax, gen_vruns, gen_robots;
    std::optional<double> gen_side, gen_horizon;
    std::optional<std::string> gen_arena;
    std::optional<std::vector<std::string>> gen_vsets;
    gen->add_option("--runs", gen_runs, "Training simulations [default 500]");
    gen->add_option("--n-min", gen_nmin, "Smallest swarm size [default 1]");
    gen->add_option("--n-max", gen_nmax, "Largest swarm size [default 30; 20 for C]");
    gen->add_option("--arena", gen_arena, "square or multi_room [default square]");
    gen->add_option("--side", gen_side, "Arena side in meters [default 20]");
    gen->add_option("--horizon", gen_horizon, "Run length in seconds [default: task T]");
    gen->add_option("--validation-runs", gen_vruns, "Runs per validation set [default 100]");
    gen->add_option("--validation-sets", gen_vsets, "Subset of vs1 vs2 vs3 [default all]");
    gen->add_option("--robots", gen_robots)->group("");  // accepted for config symmetry

    // train-model1 -------------------------------------------------------------
    auto* train = app.add_subcommand("train-model1", "Train the micro-macro fitness estimator");
    CommonOpts train_o;
    add_common(train, train_o);
    std::optional<std::string> train_data;
    std::optional<int> train_epochs, train_batch;
    std::optional<double> train_lr;
    train->add_option("--data", train_data, "Dataset directory [default <out>/dataset]");
    train->add_option("--epochs", train_epochs, "Training epochs [default 200]");
    train->add_option("--batch", train_batch, "Minibatch size [default 256]");
    train->add_option("--lr", train_lr, "Learning rate [default 1e-5; 1e-6 for C]");

    // extract-sdes -------------------------------------------------------------
    auto* sdes = app.add_subcommand("extract-sdes", "Extract the desired local states from model 1");
    CommonOpts sdes_o;
    add_common(sdes, sdes_o);
    std::optional<std::string> sdes_model1, sdes_data, sdes_out;
    std::optional<int> sdes_pop, sdes_gens;
    sdes->add_option("--model1", sdes_model1, "model1.json [default <out>/model1.json]");
    sdes->add_option("--data", sdes_data, "Dataset directory (explored-state filter)");
    sdes->add_option("--sdes", sdes_out, "Output sdes.json [default <out>/sdes.json]");
    sdes->add_option("--population", sdes_pop, "GA population [default 128]");
    sdes->add_option("--generations", sdes_gens, "GA generations [default 120]");

    // estimate-model2 ----------------------------------------------------------
    auto* est = app.add_subcommand("estimate-model2", "Estimate the local transition model");
    CommonOpts est_o;
    add_common(est, est_o);
    std::optional<std::string> est_data, est_out;
    est->add_option("--data", est_data, "Dataset directory [default <out>/dataset]");
    est->add_option("--model2", est_out, "Output model2.json [default <out>/model2.json]");

    // optimize -----------------------------------------------------------------
    auto* opt = app.add_subcommand("optimize", "PageRank-optimize a policy against model 2");
    CommonOpts opt_o;
    add_common(opt, opt_o);
    std::optional<std::string> opt_model2, opt_sdes, opt_policy;
    std::optional<double> opt_eps;
    std::optional<int> opt_pop, opt_gens;
    opt->add_option("--model2", opt_model2, "model2.json [default <out>/model2.json]");
    opt->add_option("--sdes", opt_sdes, "sdes.json [default <out>/sdes.json]");
    opt->add_option("--policy", opt_policy, "Output policy.json [default <out>/policy.json]");
    opt->add_option("--epsilon", opt_eps, "Probability floor [default 0.01]");
    opt->add_option("--population", opt_pop, "GA population [default 100]");
    opt->add_option("--generations", opt_gens, "GA generations [default 100]");

    // verify --------------------------------------------------------------------
    auto* ver = app.add_subcommand("verify", "Deadlock/livelock checks and PageRank inspection");
    CommonOpts ver_o;
    add_common(ver, ver_o);
    std::optional<std::string> ver_model2, ver_policy, ver_sdes, ver_ref;
    ver->add_option("--model2", ver_model2, "model2.json");
    ver->add_option("--policy", ver_policy, "policy.json");
    ver->add_option("--sdes", ver_sdes, "sdes.json");
    ver->add_option("--ref-policy", ver_ref, "Reference policy for PageRank deltas");

    // evaluate ------------------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "Evaluate a policy over seeded runs");
    CommonOpts ev_o;
    add_common(ev, ev_o);
    std::optional<std::string> ev_policy;
    std::optional<int> ev_runs, ev_robots;
    std::optional<double> ev_horizon, ev_side;
    bool ev_no_baseline = false;
    ev->add_option("--policy", ev_policy, "policy.json [default <out>/policy.json]");
    ev->add_option("--runs", ev_runs, "Evaluation runs [default 100]");
    ev->add_option("--robots", ev_robots, "Swarm size [default: task config]");
    ev->add_option("--horizon", ev_horizon, "Evaluation horizon seconds [default: task T]");
    ev->add_option("--side", ev_side, "Arena side in meters [default 20]");
    ev->add_flag("--no-baseline", ev_no_baseline, "Skip the random-policy baseline");

    // evolve-baseline -------------------------------------------------------------
    auto* evo = app.add_subcommand("evolve-baseline", "Simulation-based evolutionary optimization");
    CommonOpts evo_o;
    add_common(evo, evo_o);
    std::optional<int> evo_pop, evo_gens, evo_evals, evo_robots;
    std::optional<double> evo_eps, evo_side, evo_horizon;
    evo->add_option("--population", evo_pop, "Population size [default 100]");
    evo->add_option("--generations", evo_gens, "Generations [default 30]");
    evo->add_option("--evals", evo_evals, "Simulations per candidate [default 5]");
    evo->add_option("--robots", evo_robots, "Swarm size per simulation");
    evo->add_option("--epsilon", evo_eps, "Policy probability floor [default 0]");
    evo->add_option("--side", evo_side, "Arena side in meters");
    evo->add_option("--horizon", evo_horizon, "Simulation horizon seconds");

    // evolve-hybrid ----------------------------------------------------------------
    auto* hyb = app.add_subcommand("evolve-hybrid", "Evolution with model retraining and injection");
    CommonOpts hyb_o;
    add_common(hyb, hyb_o);
    std::optional<int> hyb_pop, hyb_gens, hyb_evals, hyb_robots, hyb_retrain;
    std::optional<double> hyb_eps, hyb_side, hyb_horizon;
    hyb->add_option("--population", hyb_pop, "Population size [default 100]");
    hyb->add_option("--generations", hyb_gens, "Generations [default 30]");
    hyb->add_option("--evals", hyb_evals, "Simulations per candidate [default 5]");
    hyb->add_option("--robots", hyb_robots, "Swarm size per simulation");
    hyb->add_option("--epsilon", hyb_eps, "Policy probability floor [default 0]");
    hyb->add_option("--side", hyb_side, "Arena side in meters");
    hyb->add_option("--horizon", hyb_horizon, "Simulation horizon seconds");
    hyb->add_option("--retrain-epochs", hyb_retrain, "Model-1 epochs per generation [default 40]");

    // online -------------------------------------------------------------------------
    auto* onl = app.add_subcommand("online", "Online transition-model learning during a run");
    CommonOpts onl_o;
    add_common(onl, onl_o);
    std::optional<std::string> onl_mode, onl_sdes;
    std::optional<int> onl_runs, onl_robots, onl_pop, onl_gens;
    std::optional<double> onl_period, onl_eps, onl_side, onl_horizon;
    onl->add_option("--mode", onl_mode, "shared or heterogeneous [default shared]");
    onl->add_option("--sdes", onl_sdes, "sdes.json with the fixed desired states");
    onl->add_option("--runs", onl_runs, "Independent runs [default 10]");
    onl->add_option("--robots", onl_robots, "Swarm size");
    onl->add_option("--period", onl_period, "Re-optimization period seconds [default 20]");
    onl->add_option("--epsilon", onl_eps, "Online policy floor [default 0.05]");
    onl->add_option("--population", onl_pop, "Online GA population [default 30]");
    onl->add_option("--generations", onl_gens, "Online GA generations [default 20]");
    onl->add_option("--side", onl_side, "Arena side in meters");
    onl->add_option("--horizon", onl_horizon, "Run horizon seconds");

    // standalone --------------------------------------------------------------------
    auto* sta = app.add_subcommand("standalone", "Full model-based design pipeline");
    CommonOpts sta_o;
    add_common(sta, sta_o);
    std::optional<int> sta_runs, sta_nmin, sta_nmax, sta_vruns, sta_eval_runs, sta_robots,
        sta_epochs;
    std::optional<double> sta_side, sta_horizon, sta_eps, sta_lr;
    std::optional<std::vector<std::string>> sta_vsets;
    sta->add_option("--runs", sta_runs, "Training simulations [default 500]");
    sta->add_option("--n-min", sta_nmin, "Smallest swarm size [default 1]");
    sta->add_option("--n-max", sta_nmax, "Largest swarm size [default 30; 20 for C]");
    sta->add_option("--side", sta_side, "Arena side in meters [default 20]");
    sta->add_option("--horizon", sta_horizon, "Run length seconds [default: task T]");
    sta->add_option("--validation-runs", sta_vruns, "Runs per validation set [default 100]");
    sta->add_option("--validation-sets", sta_vsets, "Subset of vs1 vs2 vs3");
    sta->add_option("--eval-runs", sta_eval_runs, "Final evaluation runs [default 100]");
    sta->add_option("--robots", sta_robots, "Swarm size for evaluation");
    sta->add_option("--epochs", sta_epochs, "Model-1 training epochs");
    sta->add_option("--lr", sta_lr, "Model-1 learning rate");
    sta->add_option("--epsilon", sta_eps, "Policy floor [default 0.01]");

    // report -------------------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "Emit plot-ready CSVs from a run directory");
    CommonOpts rep_o;
    add_common(rep, rep_o);
    std::optional<std::string> rep_run, rep_format;
    rep->add_option("--run", rep_run, "Run directory [default --out]");
    rep->add_option("--format", rep_format, "Output format [default csv]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            json j = base_config(gen_o, gen);
            set_if(gen, "--runs", j, "data", "runs", gen_runs);
            set_if(gen, "--n-min", j, "data", "n_min", gen_nmin);
            set_if(gen, "--n-max", j, "data", "n_max", gen_nmax);
            set_if(gen, "--arena", j, "data", "arena", gen_arena);
            set_if(gen, "--side", j, "data", "side_m", gen_side);
            set_if(gen, "--horizon", j, "sim", "horizon_s", gen_horizon);
            set_if(gen, "--validation-runs", j, "data", "validation_runs", gen_vruns);
            set_if(gen, "--validation-sets", j, "data", "validation_sets", gen_vsets);
            set_if(gen, "--robots", j, "sim", "n_robots", gen_robots);
            return run_stage(j, "gen-data");
        }
        if (train->parsed()) {
            json j = base_config(train_o, train);
            set_if(train, "--data", j, "paths", "dataset", train_data);
            set_if(train, "--epochs", j, "train", "epochs", train_epochs);
            set_if(train, "--batch", j, "train", "batch_size", train_batch);
            set_if(train, "--lr", j, "train", "learning_rate", train_lr);
            return run_stage(j, "train-model1");
        }
        if (sdes->parsed()) {
            json j = base_config(sdes_o, sdes);
            set_if(sdes, "--model1", j, "paths", "model1", sdes_model1);
            set_if(sdes, "--data", j, "paths", "dataset", sdes_data);
            set_if(sdes, "--sdes", j, "paths", "sdes", sdes_out);
            set_if(sdes, "--population", j, "sdes", "population", sdes_pop);
            set_if(sdes, "--generations", j, "sdes", "generations", sdes_gens);
            return run_stage(j, "extract-sdes");
        }
        if (est->parsed()) {
            json j = base_config(est_o, est);
            set_if(est, "--data", j, "paths", "dataset", est_data);
            set_if(est, "--model2", j, "paths", "model2", est_out);
            return run_stage(j, "estimate-model2");
        }
        if (opt->parsed()) {
            json j = base_config(opt_o, opt);
            set_if(opt, "--model2", j, "paths", "model2", opt_model2);
            set_if(opt, "--sdes", j, "paths", "sdes", opt_sdes);
            set_if(opt, "--policy", j, "paths", "policy", opt_policy);
            set_if(opt, "--epsilon", j, "optimize", "epsilon", opt_eps);
            set_if(opt, "--population", j, "optimize", "population", opt_pop);
            set_if(opt, "--generations", j, "optimize", "generations", opt_gens);
            return run_stage(j, "optimize");
        }
        if (ver->parsed()) {
            json j = base_config(ver_o, ver);
            set_if(ver, "--model2", j, "paths", "model2", ver_model2);
            set_if(ver, "--policy", j, "paths", "policy", ver_policy);
            set_if(ver, "--sdes", j, "paths", "sdes", ver_sdes);
            set_if(ver, "--ref-policy", j, "paths", "ref_policy", ver_ref);
            return run_stage(j, "verify");
        }
        if (ev->parsed()) {
            json j = base_config(ev_o, ev);
            set_if(ev, "--policy", j, "paths", "policy", ev_policy);
            set_if(ev, "--runs", j, "evaluate", "runs", ev_runs);
            set_if(ev, "--robots", j, "sim", "n_robots", ev_robots);
            set_if(ev, "--horizon", j, "evaluate", "horizon_s", ev_horizon);
            set_if(ev, "--side", j, "data", "side_m", ev_side);
            if (ev_no_baseline) j["evaluate"]["baseline"] = false;
            return run_stage(j, "evaluate");
        }
        if (evo->parsed()) {
            json j = base_config(evo_o, evo);
            set_if(evo, "--population", j, "evolve", "population", evo_pop);
            set_if(evo, "--generations", j, "evolve", "generations", evo_gens);
            set_if(evo, "--evals", j, "evolve", "evaluations", evo_evals);
            set_if(evo, "--robots", j, "sim", "n_robots", evo_robots);
            set_if(evo, "--epsilon", j, "evolve", "epsilon", evo_eps);
            set_if(evo, "--side", j, "data", "side_m", evo_side);
            set_if(evo, "--horizon", j, "sim", "horizon_s", evo_horizon);
            return run_stage(j, "evolve-baseline");
        }
        if (hyb->parsed()) {
            json j = base_config(hyb_o, hyb);
            set_if(hyb, "--population", j, "evolve", "population", hyb_pop);
            set_if(hyb, "--generations", j, "evolve", "generations", hyb_gens);
            set_if(hyb, "--evals", j, "evolve", "evaluations", hyb_evals);
            set_if(hyb, "--robots", j, "sim", "n_robots", hyb_robots);
            set_if(hyb, "--epsilon", j, "evolve", "epsilon", hyb_eps);
            set_if(hyb, "--side", j, "data", "side_m", hyb_side);
            set_if(hyb, "--horizon", j, "sim", "horizon_s", hyb_horizon);
            set_if(hyb, "--retrain-epochs", j, "evolve", "retrain_epochs", hyb_retrain);
            return run_stage(j, "evolve-hybrid");
        }
        if (onl->parsed()) {
            json j = base_config(onl_o, onl);
            set_if(onl, "--mode", j, "online", "mode", onl_mode);
            set_if(onl, "--sdes", j, "paths", "sdes", onl_sdes);
            set_if(onl, "--runs", j, "online", "runs", onl_runs);
            set_if(onl, "--robots", j, "sim", "n_robots", onl_robots);
            set_if(onl, "--period", j, "online", "reopt_period_s", onl_period);
            set_if(onl, "--epsilon", j, "online", "epsilon", onl_eps);
            set_if(onl, "--population", j, "online", "population", onl_pop);
            set_if(onl, "--generations", j, "online", "generations", onl_gens);
            set_if(onl, "--side", j, "data", "side_m", onl_side);
            set_if(onl, "--horizon", j, "sim", "horizon_s", onl_horizon);
            return run_stage(j, "online");
        }
        if (sta->parsed()) {
            json j = base_config(sta_o, sta);
            set_if(sta, "--runs", j, "data", "runs", sta_runs);
            set_if(sta, "--n-min", j, "data", "n_min", sta_nmin);
            set_if(sta, "--n-max", j, "data", "n_max", sta_nmax);
            set_if(sta, "--side", j, "data", "side_m", sta_side);
            set_if(sta, "--horizon", j, "sim", "horizon_s", sta_horizon);
            set_if(sta, "--validation-runs", j, "data", "validation_runs", sta_vruns);
            set_if(sta, "--validation-sets", j, "data", "validation_sets", sta_vsets);
            set_if(sta, "--eval-runs", j, "evaluate", "runs", sta_eval_runs);
            set_if(sta, "--robots", j, "sim", "n_robots", sta_robots);
            set_if(sta, "--epochs", j, "train", "epochs", sta_epochs);
            set_if(sta, "--lr", j, "train", "learning_rate", sta_lr);
            set_if(sta, "--epsilon", j, "optimize", "epsilon", sta_eps);
            return run_stage(j, "standalone");
        }
        if (rep->parsed()) {
            json j = base_config(rep_o, rep);
            set_if(rep, "--run", j, "paths", "run", rep_run);
            set_if(rep, "--format", j, "report", "format", rep_format);
            return run_stage(j, "report");
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "swarmsynth: " << e.what() << '\n';
        return 1;
    }
    std::cerr << app.help();
    return 1;
}
