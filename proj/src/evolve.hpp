#pragma once

#include "core.hpp"
#include "transition.hpp"

namespace swarmsynth {

using Genome = std::vector<double>;

// Genome families served by the one GA: flat bit vectors (desired-state
// extraction) and row-stochastic tables with a probability floor (policies).
struct GenomeSpec {
    enum class Kind { binary, stochastic_rows };
    Kind kind = Kind::binary;
    int length = 0;       // binary: number of bits
    int rows = 0;         // stochastic_rows
    int cols = 0;
    double floor_eps = 0.0;

    static GenomeSpec binary(int length);
    static GenomeSpec stochastic(int rows, int cols, double floor_eps);
    int genome_length() const;
};

struct GAConfig {
    int population = 100;
    int evaluations_per_candidate = 1;  // >1 averages noisy fitness
    int generations = 100;
    double crossover_rate = 0.7;
    double mutation_rate = -1.0;  // <0 means 1/genome_length
    double mutation_sigma = 0.1;  // gaussian scale for real genes
    int elitism = 1;
    int tournament_k = 3;
    uint64_t seed = 0;
    int jobs = 1;
    std::string checkpoint_dir;   // population JSON every checkpoint_every generations
    int checkpoint_every = 0;
    std::vector<Genome> initial;  // optional seed members for the first population

    void validate() const;
};

struct EvalContext {
    int generation = 0;
    int member = 0;
    int evaluation = 0;
    uint64_t seed = 0;
};

using FitnessFn = std::function<double(const Genome&, const EvalContext&)>;
// Tie-break between equal-fitness genomes; true when `a` is preferred.
using PreferenceFn = std::function<bool(const Genome& a, const Genome& b)>;

struct GenerationStats {
    int generation = 0;
    double best = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct EvolveResult {
    Genome best;
    double best_fitness = 0.0;
    std::vector<GenerationStats> history;
};

struct EvolveHooks {
    // After a generation's population has been evaluated.
    std::function<void(int generation, const std::vector<Genome>&, const std::vector<double>&)>
        after_evaluation;
    // The next population, before it gets evaluated; may overwrite members
    // (the hybrid pipeline injects its model-based policy here).
    std::function<void(int generation, std::vector<Genome>&)> before_next_evaluation;
};

// Tournament selection (k=3), uniform crossover, per-gene mutation (bit flip
// for binary genomes, gaussian-then-reproject for stochastic rows), elitism.
// Deterministic for a fixed seed, including under jobs > 1.
EvolveResult evolve(const GenomeSpec& spec, const FitnessFn& fitness, const GAConfig& cfg,
                    const PreferenceFn& prefer = nullptr, const EvolveHooks& hooks = {});

// Clamp a row to the floor and renormalize to sum 1 (needs eps * cols <= 1).
void project_stochastic_row(std::vector<double>& row, double floor_eps);

Genome random_genome(const GenomeSpec& spec, Rng& rng);
void mutate_genome(const GenomeSpec& spec, Genome& g, double rate, double sigma, Rng& rng);

Policy genome_to_policy(TaskId task, const GenomeSpec& spec, const Genome& g);
Genome policy_to_genome(const Policy& p);

struct PolicyOptimization {
    Policy policy;
    std::vector<GenerationStats> history;
    bool degenerate_model = false;  // model had no events; uniform policy returned
    double fitness = 0.0;           // F_pr of the returned policy
};

// PageRank-based policy optimization against a transition model: genome is
// the policy table, fitness is F_pr of the composed G. Rows keep a floor of
// `epsilon` so the verification conditions stay meaningful.
PolicyOptimization optimize_policy_pr(const TransitionModel& model, TaskId task,
                                      const DesiredStateSet& desired, const GAConfig& cfg,
                                      double epsilon = 0.01, double alpha_prior = 0.5);

void write_history_csv(const std::string& path, const std::vector<GenerationStats>& history);

}  // namespace swarmsynth
