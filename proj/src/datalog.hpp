#pragma once

#include "sim.hpp"

namespace swarmsynth {

// Model-1 training pairs: one (P_s, F_g) row per logged sample. P_s is stored
// as fractions (counts / n) so swarms of different sizes share one input
// scale; the raw counts stay recoverable from the RunLogs.
struct Dataset {
    struct Pair {
        int run_id = 0;
        double t = 0.0;
        std::vector<double> p;  // length N, sums to 1
        double target = 0.0;    // F_g(t)
    };
    int n_states = 0;
    std::string split;  // train / vs1 / vs2 / vs3
    std::vector<Pair> pairs;

    void save(const std::string& path) const;  // dataset.csv schema
    static Dataset load(const std::string& path);
};

// Which arena each run gets; multi_room draws a fresh layout per run seed.
struct ArenaSpec {
    Arena::Kind kind = Arena::Kind::square;
    double side_m = 20.0;

    Arena instantiate(uint64_t run_seed) const;
};

struct DataBuildConfig {
    int n_runs = 500;
    int n_min = 1;
    int n_max = 30;
    ArenaSpec arena;
    uint64_t seed = 0;
    int jobs = 1;
};

struct DataBuildResult {
    Dataset dataset;
    std::vector<RunLog> runs;

    std::vector<TransitionEvent> all_events() const;
    // States that appear anywhere in the logged state series.
    std::vector<int> explored_states(int n_states) const;
};

// Fresh uniform-random policy and uniform swarm size per run; every run is
// seeded from (seed, run index) so the build is reproducible under any jobs.
DataBuildResult build_training_set(const TaskConfig& base, const DataBuildConfig& cfg);

StateDistribution state_distribution(const std::vector<int>& states, int n_states);
Dataset dataset_from_runs(const std::vector<RunLog>& runs, int n_states, const std::string& split);

struct ValidationSets {
    DataBuildResult vs1;  // training arena
    DataBuildResult vs2;  // 10 x 10 square
    DataBuildResult vs3;  // random multi-room arenas
};

ValidationSets build_validation_sets(const TaskConfig& base, const DataBuildConfig& training_cfg,
                                     int runs_per_set, uint64_t seed);

// Aggregated event stream across runs (events.csv plus a run_id column).
void save_events_csv(const std::string& path, const std::vector<RunLog>& runs);
std::vector<TransitionEvent> load_events_csv(const std::string& path);
std::vector<std::vector<TransitionEvent>> load_event_batches_csv(const std::string& path);

}  // namespace swarmsynth
