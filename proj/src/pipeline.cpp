#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "csv.hpp"
#include "json.hpp"

namespace swarmsynth {

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void ga_from_json(const nlohmann::json& j, GAConfig& g) {
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("population", g.population);
    get("generations", g.generations);
    get("evaluations", g.evaluations_per_candidate);
    get("crossover_rate", g.crossover_rate);
    get("mutation_rate", g.mutation_rate);
    get("mutation_sigma", g.mutation_sigma);
    get("elitism", g.elitism);
    get("tournament_k", g.tournament_k);
    get("checkpoint_dir", g.checkpoint_dir);
    get("checkpoint_every", g.checkpoint_every);
}

nlohmann::json ga_to_json(const GAConfig& g) {
    nlohmann::json j;
    j["population"] = g.population;
    j["generations"] = g.generations;
    j["evaluations"] = g.evaluations_per_candidate;
    j["crossover_rate"] = g.crossover_rate;
    j["mutation_rate"] = g.mutation_rate;
    j["mutation_sigma"] = g.mutation_sigma;
    j["elitism"] = g.elitism;
    j["tournament_k"] = g.tournament_k;
    return j;
}

[[noreturn]] void stage_failed(const std::string& stage, const std::string& out_dir,
                               const std::exception& e) {
    throw std::runtime_error("stage '" + stage + "' failed: " + e.what() +
                             " (artifacts so far under " + out_dir + ")");
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    RunConfig cfg;
    cfg.task = task_from_string(j.value("task", "A"));
    cfg.sim = default_config(cfg.task);
    cfg.train = default_train_config(cfg.task);
    cfg.layer_sizes = default_layer_sizes(cfg.task);
    cfg.data.n_max = cfg.task == TaskId::C ? 20 : 30;  // nest congestion limit
    cfg.sdes_ga.population = 128;
    cfg.sdes_ga.generations = 120;
    cfg.optimize_ga.population = 100;
    cfg.optimize_ga.generations = 100;
    cfg.evolve_ga.population = 100;
    cfg.evolve_ga.generations = 30;
    cfg.evolve_ga.evaluations_per_candidate = 5;
    cfg.online_ga.population = 30;
    cfg.online_ga.generations = 20;

    cfg.seed = j.value("seed", 0ull);
    cfg.jobs = j.value("jobs", 1);
    cfg.out_dir = j.value("out", cfg.out_dir);

    if (j.contains("sim")) {
        nlohmann::json sim_j = j.at("sim");
        sim_j["task"] = task_to_string(cfg.task);
        cfg.sim = TaskConfig::from_json(sim_j.dump());
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        cfg.data.n_runs = d.value("runs", cfg.data.n_runs);
        cfg.data.n_min = d.value("n_min", cfg.data.n_min);
        cfg.data.n_max = d.value("n_max", cfg.data.n_max);
        std::string kind = d.value("arena", "square");
        if (kind != "square" && kind != "multi_room")
            throw ConfigError("data.arena must be 'square' or 'multi_room'");
        cfg.data.arena.kind = kind == "square" ? Arena::Kind::square : Arena::Kind::multi_room;
        cfg.data.arena.side_m = d.value("side_m", cfg.data.arena.side_m);
        cfg.validation_runs = d.value("validation_runs", cfg.validation_runs);
        if (d.contains("validation_sets"))
            cfg.validation_sets = d.at("validation_sets").get<std::vector<std::string>>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.early_stop_plateau = t.value("early_stop_plateau", cfg.train.early_stop_plateau);
        if (t.contains("layer_sizes")) cfg.layer_sizes = t.at("layer_sizes").get<std::vector<int>>();
    }
    if (j.contains("sdes")) ga_from_json(j.at("sdes"), cfg.sdes_ga);
    if (j.contains("model2")) cfg.alpha_prior = j.at("model2").value("alpha_prior", cfg.alpha_prior);
    if (j.contains("optimize")) {
        ga_from_json(j.at("optimize"), cfg.optimize_ga);
        cfg.epsilon = j.at("optimize").value("epsilon", cfg.epsilon);
    }
    if (j.contains("evaluate")) {
        const auto& e = j.at("evaluate");
        cfg.eval_runs = e.value("runs", cfg.eval_runs);
        cfg.eval_horizon_s = e.value("horizon_s", cfg.eval_horizon_s);
        cfg.eval_random_baseline = e.value("baseline", cfg.eval_random_baseline);
    }
    if (j.contains("evolve")) {
        ga_from_json(j.at("evolve"), cfg.evolve_ga);
        cfg.evolve_epsilon = j.at("evolve").value("epsilon", cfg.evolve_epsilon);
        cfg.hybrid_retrain_epochs = j.at("evolve").value("retrain_epochs", cfg.hybrid_retrain_epochs);
    }
    if (j.contains("online")) {
        const auto& o = j.at("online");
        std::string mode = o.value("mode", "shared");
        if (mode != "shared" && mode != "heterogeneous")
            throw ConfigError("online.mode must be 'shared' or 'heterogeneous'");
        cfg.online_shared = mode == "shared";
        cfg.online_runs = o.value("runs", cfg.online_runs);
        cfg.online_reopt_period_s = o.value("reopt_period_s", cfg.online_reopt_period_s);
        cfg.online_epsilon = o.value("epsilon", cfg.online_epsilon);
        cfg.online_reoptimize = o.value("reoptimize", cfg.online_reoptimize);
        ga_from_json(o, cfg.online_ga);
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        cfg.dataset_dir = p.value("dataset", "");
        cfg.model1_path = p.value("model1", "");
        cfg.model2_path = p.value("model2", "");
        cfg.sdes_path = p.value("sdes", "");
        cfg.policy_path = p.value("policy", "");
        cfg.run_dir = p.value("run", "");
        cfg.ref_policy_path = p.value("ref_policy", "");
    }
    if (j.contains("report")) cfg.report_format = j.at("report").value("format", cfg.report_format);
    cfg.data.seed = cfg.seed;
    cfg.data.jobs = cfg.jobs;
    return cfg;
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["task"] = task_to_string(task);
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["out"] = out_dir;
    j["sim"] = nlohmann::json::parse(sim.to_json());
    j["data"] = {{"runs", data.n_runs},
                 {"n_min", data.n_min},
                 {"n_max", data.n_max},
                 {"arena", data.arena.kind == Arena::Kind::square ? "square" : "multi_room"},
                 {"side_m", data.arena.side_m},
                 {"validation_runs", validation_runs},
                 {"validation_sets", validation_sets}};
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"early_stop_plateau", train.early_stop_plateau},
                  {"layer_sizes", layer_sizes}};
    j["sdes"] = ga_to_json(sdes_ga);
    j["model2"] = {{"alpha_prior", alpha_prior}};
    j["optimize"] = ga_to_json(optimize_ga);
    j["optimize"]["epsilon"] = epsilon;
    j["evaluate"] = {{"runs", eval_runs}, {"horizon_s", eval_horizon_s}, {"baseline", eval_random_baseline}};
    j["evolve"] = ga_to_json(evolve_ga);
    j["evolve"]["epsilon"] = evolve_epsilon;
    j["evolve"]["retrain_epochs"] = hybrid_retrain_epochs;
    j["online"] = {{"mode", online_shared ? "shared" : "heterogeneous"},
                   {"runs", online_runs},
                   {"reopt_period_s", online_reopt_period_s},
                   {"epsilon", online_epsilon},
                   {"reoptimize", online_reoptimize},
                   {"population", online_ga.population},
                   {"generations", online_ga.generations}};
    j["report"] = {{"format", report_format}};
    return j.dump(2);
}

void RunConfig::validate() const {
    sim.validate();
    train.validate();
    sdes_ga.validate();
    optimize_ga.validate();
    evolve_ga.validate();
    online_ga.validate();
    if (epsilon < 0.0 || epsilon >= 1.0 / sim.n_actions())
        throw ConfigError("optimize.epsilon must be in [0, 1/M)");
    if (online_epsilon < 0.0 || online_epsilon >= 1.0 / sim.n_actions())
        throw ConfigError("online.epsilon must be in [0, 1/M)");
    if (eval_runs < 1 || online_runs < 1) throw ConfigError("run counts must be >= 1");
    if (validation_runs < 1) throw ConfigError("validation_runs must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (online_reopt_period_s <= 0) throw ConfigError("online.reopt_period_s must be positive");
    for (const auto& v : validation_sets)
        if (v != "vs1" && v != "vs2" && v != "vs3")
            throw ConfigError("validation set names must be vs1, vs2 or vs3");
    if (report_format != "csv") throw ConfigError("report.format: only 'csv' is supported");
    if (eval_horizon_s < 0) throw ConfigError("evaluate.horizon_s must be >= 0");
    if (data.n_runs < 1 || data.n_min < 1 || data.n_max < data.n_min)
        throw ConfigError("bad dataset configuration");
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ConfigError("quantile of empty sample");
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * q;
    size_t lo = static_cast<size_t>(std::floor(h));
    size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

EvaluationSummary summarize_runs(const std::vector<std::vector<double>>& series,
                                 const std::vector<double>& times) {
    if (series.empty()) throw ConfigError("no runs to summarize");
    EvaluationSummary s;
    s.times = times;
    const size_t samples = series[0].size();
    s.mean_series.assign(samples, 0.0);
    s.std_series.assign(samples, 0.0);
    for (const auto& run : series) {
        if (run.size() != samples) throw ConfigError("misaligned fitness series");
        for (size_t i = 0; i < samples; ++i) s.mean_series[i] += run[i];
    }
    for (double& m : s.mean_series) m /= static_cast<double>(series.size());
    for (const auto& run : series)
        for (size_t i = 0; i < samples; ++i) {
            double d = run[i] - s.mean_series[i];
            s.std_series[i] += d * d;
        }
    for (double& v : s.std_series) v = std::sqrt(v / static_cast<double>(series.size()));
    for (const auto& run : series) s.final_fitness.push_back(run.back());
    s.min = quantile(s.final_fitness, 0.0);
    s.q1 = quantile(s.final_fitness, 0.25);
    s.median = quantile(s.final_fitness, 0.5);
    s.q3 = quantile(s.final_fitness, 0.75);
    s.max = quantile(s.final_fitness, 1.0);
    return s;
}

void EvaluationSummary::save(const std::string& dir) const {
    fs::create_directories(dir);
    {
        CsvWriter csv(dir + "/summary.csv", {"stat", "value"});
        csv.field("runs").field(static_cast<int>(final_fitness.size())).endrow();
        double mean = std::accumulate(final_fitness.begin(), final_fitness.end(), 0.0) /
                      static_cast<double>(final_fitness.size());
        double var = 0;
        for (double f : final_fitness) var += (f - mean) * (f - mean);
        csv.field("mean_final").field(mean).endrow();
        csv.field("std_final").field(std::sqrt(var / static_cast<double>(final_fitness.size()))).endrow();
        csv.field("min").field(min).endrow();
        csv.field("q1").field(q1).endrow();
        csv.field("median").field(median).endrow();
        csv.field("q3").field(q3).endrow();
        csv.field("max").field(max).endrow();
        for (size_t i = 0; i < final_fitness.size(); ++i)
            csv.field("final_" + std::to_string(i)).field(final_fitness[i]).endrow();
    }
    {
        CsvWriter csv(dir + "/series.csv", {"t", "mean", "std"});
        for (size_t i = 0; i < times.size(); ++i)
            csv.field(times[i]).field(mean_series[i]).field(std_series[i]).endrow();
    }
}

EvaluationSummary evaluate(const TaskConfig& cfg, const Policy& policy, const Arena& arena,
                           int n_runs, uint64_t seed, int jobs) {
    if (n_runs < 1) throw ConfigError("evaluate needs n_runs >= 1");
    std::vector<std::vector<double>> series(static_cast<size_t>(n_runs));
    std::vector<double> times;
    parallel_for(n_runs, jobs, [&](int i) {
        RunLog log = run_simulation(cfg, policy, arena, mix_seed(seed, static_cast<uint64_t>(i)));
        series[static_cast<size_t>(i)] = log.fitness;
        if (i == 0) times = log.times;
    });
    if (times.empty()) times = std::vector<double>(series[0].size(), 0.0);
    return summarize_runs(series, times);
}

EvaluationSummary evaluate_random_baseline(const TaskConfig& cfg, const Arena& arena, int n_runs,
                                           uint64_t seed, int jobs) {
    const LocalStateSpace space = state_space_for(cfg.task);
    const ActionSpace actions = action_space_for(cfg.task);
    std::vector<std::vector<double>> series(static_cast<size_t>(n_runs));
    std::vector<double> times;
    parallel_for(n_runs, jobs, [&](int i) {
        uint64_t rs = mix_seed(seed, static_cast<uint64_t>(i));
        Policy policy = uniform_random_policy(space, actions, mix_seed(rs, 0x62617365ull));
        RunLog log = run_simulation(cfg, policy, arena, rs);
        series[static_cast<size_t>(i)] = log.fitness;
        if (i == 0) times = log.times;
    });
    return summarize_runs(series, times);
}

namespace {

void save_databuild(const std::string& dir, const DataBuildResult& build) {
    fs::create_directories(dir);
    build.dataset.save(dir + "/dataset.csv");
    save_events_csv(dir + "/events.csv", build.runs);
}

std::vector<int> explored_from_dataset(const Dataset& ds) {
    std::vector<char> seen(static_cast<size_t>(ds.n_states), 0);
    for (const auto& pair : ds.pairs)
        for (size_t i = 0; i < pair.p.size(); ++i)
            if (pair.p[i] > 0.0) seen[i] = 1;
    std::vector<int> out;
    for (int s = 0; s < ds.n_states; ++s)
        if (seen[static_cast<size_t>(s)]) out.push_back(s);
    return out;
}

Policy uniform_policy(TaskId task, int n, int m) {
    Matrix t = zeros(n, m);
    for (auto& row : t) row.assign(static_cast<size_t>(m), 1.0 / m);
    return Policy(task, std::move(t));
}

struct BuiltData {
    DataBuildResult train;
    std::vector<std::pair<std::string, DataBuildResult>> validations;  // name -> build
};

BuiltData build_all_data(const RunConfig& cfg) {
    BuiltData out;
    DataBuildConfig dc = cfg.data;
    dc.jobs = cfg.jobs;
    dc.seed = mix_seed(cfg.seed, 0x64617461ull);
    out.train = build_training_set(cfg.sim, dc);

    for (const auto& name : cfg.validation_sets) {
        DataBuildConfig vc = dc;
        vc.n_runs = cfg.validation_runs;
        if (name == "vs1") {
            vc.seed = mix_seed(cfg.seed, 1);
        } else if (name == "vs2") {
            vc.seed = mix_seed(cfg.seed, 2);
            vc.arena.kind = Arena::Kind::square;
            vc.arena.side_m = 10.0;
        } else {
            vc.seed = mix_seed(cfg.seed, 3);
            vc.arena.kind = Arena::Kind::multi_room;
        }
        DataBuildResult b = build_training_set(cfg.sim, vc);
        b.dataset.split = name;
        out.validations.push_back({name, std::move(b)});
    }
    return out;
}

}  // namespace

StandaloneResult run_standalone(const RunConfig& cfg) {
    cfg.validate();
    StandaloneResult out;
    const int n_states = cfg.sim.n_states();
    const int n_actions = cfg.sim.n_actions();
    fs::create_directories(cfg.out_dir);
    spit(cfg.out_dir + "/config.json", cfg.to_json());

    BuiltData data;
    try {
        data = build_all_data(cfg);
        save_databuild(cfg.path_dataset() + "/train", data.train);
        for (const auto& [name, build] : data.validations)
            save_databuild(cfg.path_dataset() + "/" + name, build);
    } catch (const std::exception& e) {
        stage_failed("gen-data", cfg.out_dir, e);
    }
    out.training_simulations = cfg.data.n_runs;

    TrainResult tr;
    try {
        out.model1 = MicroMacroModel(cfg.layer_sizes, mix_seed(cfg.seed, 0x6d31ull));
        std::vector<const Dataset*> vals;
        for (const auto& [name, build] : data.validations) vals.push_back(&build.dataset);
        tr = train(out.model1, data.train.dataset, vals, cfg.train);
        spit(cfg.path_model1(), out.model1.to_json());
        write_train_history_csv(cfg.out_dir + "/train_history.csv", tr.history);
        for (const auto& [name, build] : data.validations)
            if (name == "vs1") out.vs1_correlation = validate_correlation(out.model1, build.dataset);
    } catch (const std::exception& e) {
        stage_failed("train-model1", cfg.out_dir, e);
    }

    try {
        std::vector<int> explored = data.train.explored_states(n_states);
        GAConfig ga = cfg.sdes_ga;
        ga.seed = mix_seed(cfg.seed, 0x73646573ull);
        out.sdes = extract_desired_states(out.model1, ga, &explored);
        if (out.sdes.members.empty())
            throw std::runtime_error("extracted desired state set is empty; cannot optimize");
        spit(cfg.path_sdes(), out.sdes.to_json(cfg.task));
    } catch (const std::exception& e) {
        stage_failed("extract-sdes", cfg.out_dir, e);
    }

    try {
        out.model2 = estimate(data.train.all_events(), n_states, n_actions);
        spit(cfg.path_model2(), out.model2.to_json());
    } catch (const std::exception& e) {
        stage_failed("estimate-model2", cfg.out_dir, e);
    }

    try {
        GAConfig ga = cfg.optimize_ga;
        ga.seed = mix_seed(cfg.seed, 0x6f7074ull);
        ga.jobs = cfg.jobs;
        PolicyOptimization opt =
            optimize_policy_pr(out.model2, cfg.task, out.sdes, ga, cfg.epsilon, cfg.alpha_prior);
        out.policy = opt.policy;
        out.policy_fitness_pr = opt.fitness;
        spit(cfg.path_policy(), out.policy.to_json());
        write_history_csv(cfg.out_dir + "/history.csv", opt.history);
    } catch (const std::exception& e) {
        stage_failed("optimize", cfg.out_dir, e);
    }

    try {
        Policy ref = uniform_policy(cfg.task, n_states, n_actions);
        out.verification = verify_policy(out.model2, out.policy, out.sdes, nullptr, &ref);
        spit(cfg.out_dir + "/verify.json", out.verification.to_json());
        spit(cfg.out_dir + "/verify.txt", out.verification.to_text());
    } catch (const std::exception& e) {
        stage_failed("verify", cfg.out_dir, e);
    }

    try {
        TaskConfig ec = cfg.sim;
        if (cfg.eval_horizon_s > 0) ec.horizon_s = cfg.eval_horizon_s;
        Arena arena = square_arena(cfg.data.arena.side_m);
        out.evaluation = evaluate(ec, out.policy, arena, cfg.eval_runs,
                                  mix_seed(cfg.seed, 0x6576616cull), cfg.jobs);
        out.evaluation.save(cfg.out_dir + "/eval");
        if (cfg.eval_random_baseline) {
            out.baseline = evaluate_random_baseline(ec, arena, cfg.eval_runs,
                                                    mix_seed(cfg.seed, 0x72616e64ull), cfg.jobs);
            out.baseline.save(cfg.out_dir + "/baseline");
        }
    } catch (const std::exception& e) {
        stage_failed("evaluate", cfg.out_dir, e);
    }
    return out;
}

BaselineEvolutionResult run_baseline_evolution(const RunConfig& cfg) {
    cfg.validate();
    const int n = cfg.sim.n_states(), m = cfg.sim.n_actions();
    GenomeSpec spec = GenomeSpec::stochastic(n, m, cfg.evolve_epsilon);
    Arena arena = square_arena(cfg.data.arena.side_m);
    FitnessFn fit = [&](const Genome& g, const EvalContext& ctx) {
        Policy p = genome_to_policy(cfg.task, spec, g);
        RunLog log = run_simulation(cfg.sim, p, arena, ctx.seed);
        return log.fitness.back();
    };
    GAConfig ga = cfg.evolve_ga;
    ga.seed = mix_seed(cfg.seed, 0x65766f6cull);
    ga.jobs = cfg.jobs;
    EvolveResult res = evolve(spec, fit, ga);
    BaselineEvolutionResult out;
    out.policy = genome_to_policy(cfg.task, spec, res.best);
    out.history = res.history;
    out.simulations = ga.population * ga.evaluations_per_candidate * ga.generations;
    return out;
}

HybridEvolutionResult run_hybrid_evolution(const RunConfig& cfg) {
    cfg.validate();
    const int n = cfg.sim.n_states(), m = cfg.sim.n_actions();
    const int population = cfg.evolve_ga.population;
    const int evals = cfg.evolve_ga.evaluations_per_candidate;
    GenomeSpec spec = GenomeSpec::stochastic(n, m, cfg.evolve_epsilon);
    Arena arena = square_arena(cfg.data.arena.side_m);

    HybridEvolutionResult out;
    std::vector<RunLog> accumulated;
    std::vector<RunLog> slots(static_cast<size_t>(population * evals));
    bool injection_ready = false;
    bool injected_live = false;  // true once the current population holds it
    Policy injected = uniform_policy(cfg.task, n, m);
    const int injected_index = population - 1;

    FitnessFn fit = [&](const Genome& g, const EvalContext& ctx) {
        Policy p = genome_to_policy(cfg.task, spec, g);
        RunLog log = run_simulation(cfg.sim, p, arena, ctx.seed);
        double final_fg = log.fitness.back();
        slots[static_cast<size_t>(ctx.member * evals + ctx.evaluation)] = std::move(log);
        return final_fg;
    };

    EvolveHooks hooks;
    hooks.after_evaluation = [&](int gen, const std::vector<Genome>&, const std::vector<double>& f) {
        for (auto& log : slots) accumulated.push_back(std::move(log));
        out.runs_accumulated_per_generation.push_back(static_cast<int>(accumulated.size()));
        if (injected_live) {
            double fi = f[static_cast<size_t>(injected_index)];
            out.injected_fitness.push_back(fi);
            int rank = 0;
            for (int i = 0; i < population; ++i)
                if (i != injected_index && f[static_cast<size_t>(i)] > fi) ++rank;
            out.injected_rank.push_back(rank);
        }

        // Refit both models on everything seen so far, then stage the
        // PageRank-optimized policy for the next population.
        out.model1 = MicroMacroModel(cfg.layer_sizes, mix_seed(cfg.seed, 0x6830ull + gen));
        TrainConfig tc = cfg.train;
        tc.epochs = cfg.hybrid_retrain_epochs;
        tc.early_stop_plateau = 0;
        train(out.model1, dataset_from_runs(accumulated, n, "train"), {}, tc);

        std::vector<char> seen(static_cast<size_t>(n), 0);
        for (const auto& run : accumulated)
            for (const auto& sample : run.states)
                for (int s : sample) seen[static_cast<size_t>(s)] = 1;
        std::vector<int> explored;
        for (int s = 0; s < n; ++s)
            if (seen[static_cast<size_t>(s)]) explored.push_back(s);

        GAConfig sga = cfg.sdes_ga;
        sga.seed = mix_seed(cfg.seed, 0x6873ull + gen);
        out.sdes = extract_desired_states(out.model1, sga, &explored);

        std::vector<TransitionEvent> events;
        for (const auto& run : accumulated)
            events.insert(events.end(), run.events.begin(), run.events.end());
        out.model2 = estimate(events, n, m);

        if (!out.sdes.members.empty() && !out.model2.empty()) {
            GAConfig oga = cfg.optimize_ga;
            oga.seed = mix_seed(cfg.seed, 0x686full + gen);
            PolicyOptimization opt = optimize_policy_pr(out.model2, cfg.task, out.sdes, oga,
                                                        cfg.epsilon, cfg.alpha_prior);
            injected = opt.policy;
            injection_ready = true;
        }
    };
    hooks.before_next_evaluation = [&](int, std::vector<Genome>& next) {
        if (!injection_ready) return;
        next[static_cast<size_t>(injected_index)] = policy_to_genome(injected);
        injected_live = true;
    };

    GAConfig ga = cfg.evolve_ga;
    ga.seed = mix_seed(cfg.seed, 0x687962ull);
    ga.jobs = cfg.jobs;
    EvolveResult res = evolve(spec, fit, ga, nullptr, hooks);
    out.policy = genome_to_policy(cfg.task, spec, res.best);
    out.history = res.history;
    out.simulations = population * evals * ga.generations;
    return out;
}

OnlineResult run_online(const RunConfig& cfg, const DesiredStateSet& sdes) {
    cfg.validate();
    if (sdes.members.empty()) throw ConfigError("online learning needs a non-empty desired state set");
    const int n = cfg.sim.n_states(), m = cfg.sim.n_actions();
    const LocalStateSpace space = state_space_for(cfg.task);
    const ActionSpace actions = action_space_for(cfg.task);

    OnlineResult out;
    out.fitness_traces.assign(static_cast<size_t>(cfg.online_runs), {});
    std::vector<std::vector<double>> times(static_cast<size_t>(cfg.online_runs));

    parallel_for(cfg.online_runs, cfg.jobs, [&](int run) {
        uint64_t rs = mix_seed(cfg.seed, 0x6f6e6c696eull + static_cast<uint64_t>(run));
        Arena arena = square_arena(cfg.data.arena.side_m);
        Policy init = uniform_random_policy(space, actions, mix_seed(rs, 1));
        Simulator sim(cfg.sim, init, arena, rs);
        if (!cfg.online_shared)
            for (int i = 0; i < cfg.sim.n_robots; ++i)
                sim.set_policy(i, uniform_random_policy(space, actions, mix_seed(rs, 100 + i)));

        const int log_every = static_cast<int>(std::llround(1.0 / (cfg.sim.log_hz * cfg.sim.dt)));
        const int reopt_every =
            static_cast<int>(std::llround(cfg.online_reopt_period_s / cfg.sim.dt));
        const int total = static_cast<int>(std::llround(cfg.sim.horizon_s / cfg.sim.dt));

        auto& trace = out.fitness_traces[static_cast<size_t>(run)];
        auto& ts = times[static_cast<size_t>(run)];
        trace.push_back(sim.global_fitness());
        ts.push_back(0.0);

        int boundary = 0;
        for (int s = 1; s <= total; ++s) {
            sim.step();
            if (cfg.online_reoptimize && s % reopt_every == 0) {
                ++boundary;
                // Per-robot counts, merged when the model is shared.
                std::vector<TransitionModel> per_robot(static_cast<size_t>(cfg.sim.n_robots),
                                                       TransitionModel(n, m));
                for (const auto& e : sim.events())
                    per_robot[static_cast<size_t>(e.robot)].add_event(e);
                if (cfg.online_shared) {
                    TransitionModel pooled(n, m);
                    for (const auto& mr : per_robot) pooled.merge(mr);
                    if (!pooled.empty()) {
                        GAConfig ga = cfg.online_ga;
                        ga.seed = mix_seed(rs, 1000 + static_cast<uint64_t>(boundary));
                        PolicyOptimization opt = optimize_policy_pr(
                            pooled, cfg.task, sdes, ga, cfg.online_epsilon, cfg.alpha_prior);
                        sim.set_policy(opt.policy);
                    }
                } else {
                    for (int i = 0; i < cfg.sim.n_robots; ++i) {
                        if (per_robot[static_cast<size_t>(i)].empty()) continue;
                        GAConfig ga = cfg.online_ga;
                        ga.seed = mix_seed(rs, 2000 + static_cast<uint64_t>(boundary) *
                                                            static_cast<uint64_t>(cfg.sim.n_robots) +
                                                            static_cast<uint64_t>(i));
                        PolicyOptimization opt =
                            optimize_policy_pr(per_robot[static_cast<size_t>(i)], cfg.task, sdes,
                                               ga, cfg.online_epsilon, cfg.alpha_prior);
                        sim.set_policy(i, opt.policy);
                    }
                }
            }
            if (s % log_every == 0) {
                trace.push_back(sim.global_fitness());
                ts.push_back(sim.time());
            }
        }
    });
    out.times = times[0];
    for (const auto& trace : out.fitness_traces) out.final_fitness.push_back(trace.back());
    return out;
}

void stage_gen_data(const RunConfig& cfg) {
    cfg.validate();
    try {
        BuiltData data = build_all_data(cfg);
        save_databuild(cfg.path_dataset() + "/train", data.train);
        for (const auto& [name, build] : data.validations)
            save_databuild(cfg.path_dataset() + "/" + name, build);
        nlohmann::json meta;
        meta["task"] = task_to_string(cfg.task);
        meta["n_states"] = cfg.sim.n_states();
        meta["n_actions"] = cfg.sim.n_actions();
        meta["seed"] = cfg.seed;
        meta["runs"] = cfg.data.n_runs;
        spit(cfg.path_dataset() + "/meta.json", meta.dump(2));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("gen-data", cfg.out_dir, e);
    }
}

void stage_train_model1(const RunConfig& cfg) {
    cfg.validate();
    try {
        Dataset training = Dataset::load(cfg.path_dataset() + "/train/dataset.csv");
        std::vector<Dataset> vals;
        for (const auto& name : cfg.validation_sets) {
            std::string p = cfg.path_dataset() + "/" + name + "/dataset.csv";
            if (fs::exists(p)) vals.push_back(Dataset::load(p));
        }
        std::vector<const Dataset*> val_ptrs;
        for (const auto& v : vals) val_ptrs.push_back(&v);
        MicroMacroModel model(cfg.layer_sizes, mix_seed(cfg.seed, 0x6d31ull));
        TrainResult tr = train(model, training, val_ptrs, cfg.train);
        spit(cfg.path_model1(), model.to_json());
        write_train_history_csv(cfg.out_dir + "/train_history.csv", tr.history);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("train-model1", cfg.out_dir, e);
    }
}

void stage_extract_sdes(const RunConfig& cfg) {
    cfg.validate();
    try {
        MicroMacroModel model = MicroMacroModel::from_json(slurp(cfg.path_model1()));
        Dataset training = Dataset::load(cfg.path_dataset() + "/train/dataset.csv");
        std::vector<int> explored = explored_from_dataset(training);
        GAConfig ga = cfg.sdes_ga;
        ga.seed = mix_seed(cfg.seed, 0x73646573ull);
        DesiredStateSet sdes = extract_desired_states(model, ga, &explored);
        spit(cfg.path_sdes(), sdes.to_json(cfg.task));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("extract-sdes", cfg.out_dir, e);
    }
}

void stage_estimate_model2(const RunConfig& cfg) {
    cfg.validate();
    try {
        auto events = load_events_csv(cfg.path_dataset() + "/train/events.csv");
        TransitionModel model = estimate(events, cfg.sim.n_states(), cfg.sim.n_actions());
        spit(cfg.path_model2(), model.to_json());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("estimate-model2", cfg.out_dir, e);
    }
}

void stage_optimize(const RunConfig& cfg) {
    cfg.validate();
    try {
        TransitionModel model = TransitionModel::from_json(slurp(cfg.path_model2()));
        DesiredStateSet sdes = DesiredStateSet::from_json(slurp(cfg.path_sdes()));
        GAConfig ga = cfg.optimize_ga;
        ga.seed = mix_seed(cfg.seed, 0x6f7074ull);
        ga.jobs = cfg.jobs;
        PolicyOptimization opt =
            optimize_policy_pr(model, cfg.task, sdes, ga, cfg.epsilon, cfg.alpha_prior);
        spit(cfg.path_policy(), opt.policy.to_json());
        write_history_csv(cfg.out_dir + "/history.csv", opt.history);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("optimize", cfg.out_dir, e);
    }
}

void stage_verify(const RunConfig& cfg) {
    cfg.validate();
    try {
        TransitionModel model = TransitionModel::from_json(slurp(cfg.path_model2()));
        Policy policy = Policy::from_json(slurp(cfg.path_policy()));
        DesiredStateSet sdes = DesiredStateSet::from_json(slurp(cfg.path_sdes()));
        VerificationReport rep;
        if (!cfg.ref_policy_path.empty()) {
            Policy ref = Policy::from_json(slurp(cfg.ref_policy_path));
            rep = verify_policy(model, policy, sdes, nullptr, &ref);
        } else {
            rep = verify_policy(model, policy, sdes);
        }
        spit(cfg.out_dir + "/verify.json", rep.to_json());
        spit(cfg.out_dir + "/verify.txt", rep.to_text());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("verify", cfg.out_dir, e);
    }
}

void stage_evaluate(const RunConfig& cfg) {
    cfg.validate();
    try {
        Policy policy = Policy::from_json(slurp(cfg.path_policy()));
        TaskConfig ec = cfg.sim;
        if (cfg.eval_horizon_s > 0) ec.horizon_s = cfg.eval_horizon_s;
        Arena arena = square_arena(cfg.data.arena.side_m);
        EvaluationSummary s =
            evaluate(ec, policy, arena, cfg.eval_runs, mix_seed(cfg.seed, 0x6576616cull), cfg.jobs);
        s.save(cfg.out_dir + "/eval");
        if (cfg.eval_random_baseline) {
            EvaluationSummary b = evaluate_random_baseline(
                ec, arena, cfg.eval_runs, mix_seed(cfg.seed, 0x72616e64ull), cfg.jobs);
            b.save(cfg.out_dir + "/baseline");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("evaluate", cfg.out_dir, e);
    }
}

void stage_evolve_baseline(const RunConfig& cfg) {
    try {
        BaselineEvolutionResult res = run_baseline_evolution(cfg);
        spit(cfg.path_policy(), res.policy.to_json());
        write_history_csv(cfg.out_dir + "/history.csv", res.history);
        nlohmann::json meta;
        meta["simulations"] = res.simulations;
        spit(cfg.out_dir + "/evolution_meta.json", meta.dump(2));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("evolve-baseline", cfg.out_dir, e);
    }
}

void stage_evolve_hybrid(const RunConfig& cfg) {
    try {
        HybridEvolutionResult res = run_hybrid_evolution(cfg);
        spit(cfg.path_policy(), res.policy.to_json());
        write_history_csv(cfg.out_dir + "/history.csv", res.history);
        spit(cfg.path_model1(), res.model1.to_json());
        spit(cfg.path_model2(), res.model2.to_json());
        spit(cfg.path_sdes(), res.sdes.to_json(cfg.task));
        CsvWriter csv(cfg.out_dir + "/hybrid.csv",
                      {"generation", "injected_fitness", "injected_rank", "runs_accumulated"});
        for (size_t i = 0; i < res.injected_fitness.size(); ++i) {
            csv.field(static_cast<int>(i + 1))
                .field(res.injected_fitness[i])
                .field(res.injected_rank[i])
                .field(res.runs_accumulated_per_generation[i + 1])
                .endrow();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("evolve-hybrid", cfg.out_dir, e);
    }
}

void stage_online(const RunConfig& cfg) {
    try {
        DesiredStateSet sdes = DesiredStateSet::from_json(slurp(cfg.path_sdes()));
        OnlineResult res = run_online(cfg, sdes);
        fs::create_directories(cfg.out_dir + "/online");
        std::vector<std::string> header = {"t"};
        for (size_t r = 0; r < res.fitness_traces.size(); ++r)
            header.push_back("run_" + std::to_string(r));
        header.push_back("mean");
        header.push_back("std");
        CsvWriter csv(cfg.out_dir + "/online/traces.csv", header);
        for (size_t i = 0; i < res.times.size(); ++i) {
            csv.field(res.times[i]);
            double mean = 0;
            for (const auto& tr : res.fitness_traces) mean += tr[i];
            mean /= static_cast<double>(res.fitness_traces.size());
            double var = 0;
            for (const auto& tr : res.fitness_traces) var += (tr[i] - mean) * (tr[i] - mean);
            for (const auto& tr : res.fitness_traces) csv.field(tr[i]);
            csv.field(mean).field(std::sqrt(var / static_cast<double>(res.fitness_traces.size())));
            csv.endrow();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("online", cfg.out_dir, e);
    }
}

void stage_standalone(const RunConfig& cfg) { run_standalone(cfg); }

void stage_report(const RunConfig& cfg) {
    cfg.validate();
    const std::string run = cfg.run_dir.empty() ? cfg.out_dir : cfg.run_dir;
    try {
        auto load_summary = [&](const std::string& dir, bool required) {
            std::vector<std::pair<std::string, double>> stats;
            std::string p = dir + "/summary.csv";
            if (!fs::exists(p)) {
                if (required) throw std::runtime_error("missing " + p);
                return stats;
            }
            CsvTable t = read_csv(p);
            for (const auto& row : t.rows) stats.push_back({row[0], parse_double(row[1])});
            return stats;
        };
        auto stat = [](const std::vector<std::pair<std::string, double>>& stats, const std::string& k) {
            for (const auto& [key, v] : stats)
                if (key == k) return v;
            throw std::runtime_error("missing stat " + k);
        };

        auto eval_stats = load_summary(run + "/eval", true);
        auto base_stats = load_summary(run + "/baseline", false);
        fs::create_directories(run + "/report");
        {
            CsvWriter csv(run + "/report/boxplot.csv", {"label", "min", "q1", "median", "q3", "max"});
            csv.field("optimized")
                .field(stat(eval_stats, "min"))
                .field(stat(eval_stats, "q1"))
                .field(stat(eval_stats, "median"))
                .field(stat(eval_stats, "q3"))
                .field(stat(eval_stats, "max"))
                .endrow();
            if (!base_stats.empty()) {
                csv.field("random")
                    .field(stat(base_stats, "min"))
                    .field(stat(base_stats, "q1"))
                    .field(stat(base_stats, "median"))
                    .field(stat(base_stats, "q3"))
                    .field(stat(base_stats, "max"))
                    .endrow();
            }
        }
        {
            CsvTable series = read_csv(run + "/eval/series.csv");
            CsvWriter csv(run + "/report/timeseries.csv", {"t", "mean", "std"});
            for (const auto& row : series.rows)
                csv.field(row[0]).field(row[1]).field(row[2]).endrow();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        stage_failed("report", cfg.out_dir, e);
    }
}

}  // namespace swarmsynth
