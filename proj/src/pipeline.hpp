#pragma once

#include "datalog.hpp"
#include "micromacro.hpp"
#include "verify.hpp"

namespace swarmsynth {

// Everything a run needs, normally parsed from a JSON config document with
// per-task defaults filled in first (flags override file values upstream).
struct RunConfig {
    TaskId task = TaskId::A;
    uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir = "runs/out";

    TaskConfig sim;

    // dataset generation
    DataBuildConfig data;
    int validation_runs = 100;
    std::vector<std::string> validation_sets = {"vs1", "vs2", "vs3"};

    // model 1
    TrainConfig train;
    std::vector<int> layer_sizes;

    // S_des extraction
    GAConfig sdes_ga;

    // model 2
    double alpha_prior = 0.5;

    // policy optimization
    GAConfig optimize_ga;
    double epsilon = 0.01;

    // evaluation
    int eval_runs = 100;
    double eval_horizon_s = 0.0;  // 0 = task horizon
    bool eval_random_baseline = true;

    // simulation-based evolution (baseline and hybrid)
    GAConfig evolve_ga;
    double evolve_epsilon = 0.0;
    int hybrid_retrain_epochs = 40;

    // online learning
    bool online_shared = true;
    int online_runs = 10;
    double online_reopt_period_s = 20.0;
    double online_epsilon = 0.05;
    GAConfig online_ga;
    bool online_reoptimize = true;

    // per-stage input/output path overrides
    std::string dataset_dir, model1_path, model2_path, sdes_path, policy_path, run_dir,
        ref_policy_path;
    std::string report_format = "csv";

    static RunConfig from_json(const std::string& json);
    std::string to_json() const;
    void validate() const;

    std::string path_dataset() const { return dataset_dir.empty() ? out_dir + "/dataset" : dataset_dir; }
    std::string path_model1() const { return model1_path.empty() ? out_dir + "/model1.json" : model1_path; }
    std::string path_model2() const { return model2_path.empty() ? out_dir + "/model2.json" : model2_path; }
    std::string path_sdes() const { return sdes_path.empty() ? out_dir + "/sdes.json" : sdes_path; }
    std::string path_policy() const { return policy_path.empty() ? out_dir + "/policy.json" : policy_path; }
};

struct EvaluationSummary {
    std::vector<double> times;        // 2 Hz
    std::vector<double> mean_series;  // mean F_g(t) across runs
    std::vector<double> std_series;
    std::vector<double> final_fitness;  // per run F_g(T)
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;

    void save(const std::string& dir) const;  // summary.csv + series.csv
};

EvaluationSummary summarize_runs(const std::vector<std::vector<double>>& series,
                                 const std::vector<double>& times);
double quantile(std::vector<double> values, double q);

EvaluationSummary evaluate(const TaskConfig& cfg, const Policy& policy, const Arena& arena,
                           int n_runs, uint64_t seed, int jobs = 1);
// Fresh uniform-random policy per run.
EvaluationSummary evaluate_random_baseline(const TaskConfig& cfg, const Arena& arena, int n_runs,
                                           uint64_t seed, int jobs = 1);

struct StandaloneResult {
    MicroMacroModel model1;
    DesiredStateSet sdes;
    TransitionModel model2{1, 1};
    Policy policy{TaskId::A, {{1.0}}};
    double policy_fitness_pr = 0.0;
    VerificationReport verification;
    EvaluationSummary evaluation;
    EvaluationSummary baseline;  // random policies, when enabled
    CorrelationResult vs1_correlation;
    int training_simulations = 0;  // budget bookkeeping
};

// Full model-based design flow: data -> model 1 -> S_des -> model 2 ->
// PageRank policy -> verification -> evaluation, persisting artifacts to
// cfg.out_dir along the way.
StandaloneResult run_standalone(const RunConfig& cfg);

struct BaselineEvolutionResult {
    Policy policy{TaskId::A, {{1.0}}};
    std::vector<GenerationStats> history;
    int simulations = 0;
};

BaselineEvolutionResult run_baseline_evolution(const RunConfig& cfg);

struct HybridEvolutionResult {
    Policy policy{TaskId::A, {{1.0}}};
    std::vector<GenerationStats> history;
    MicroMacroModel model1;
    TransitionModel model2{1, 1};
    DesiredStateSet sdes;
    // Injected model-based member, tracked from generation 1 on.
    std::vector<double> injected_fitness;
    std::vector<int> injected_rank;  // 0 = generation best
    std::vector<int> runs_accumulated_per_generation;
    int simulations = 0;
};

HybridEvolutionResult run_hybrid_evolution(const RunConfig& cfg);

struct OnlineResult {
    std::vector<double> times;
    std::vector<std::vector<double>> fitness_traces;  // [run][sample]
    std::vector<double> final_fitness;
};

// Robots start on a random policy with empty counts; every reopt period the
// transition model is re-estimated (pooled or per robot) and the policy
// re-optimized against the fixed S_des.
OnlineResult run_online(const RunConfig& cfg, const DesiredStateSet& sdes);

// File-level stages behind the CLI. Each reads/writes under cfg paths.
void stage_gen_data(const RunConfig& cfg);
void stage_train_model1(const RunConfig& cfg);
void stage_extract_sdes(const RunConfig& cfg);
void stage_estimate_model2(const RunConfig& cfg);
void stage_optimize(const RunConfig& cfg);
void stage_verify(const RunConfig& cfg);
void stage_evaluate(const RunConfig& cfg);
void stage_evolve_baseline(const RunConfig& cfg);
void stage_evolve_hybrid(const RunConfig& cfg);
void stage_online(const RunConfig& cfg);
void stage_standalone(const RunConfig& cfg);
void stage_report(const RunConfig& cfg);

}  // namespace swarmsynth
