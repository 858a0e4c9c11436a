#include "datalog.hpp"

#include <algorithm>
#include <filesystem>

#include "csv.hpp"

namespace swarmsynth {

void Dataset::save(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::vector<std::string> header = {"run_id", "t"};
    for (int i = 0; i < n_states; ++i) header.push_back("p_" + std::to_string(i));
    header.push_back("F_g");
    CsvWriter csv(path, header);
    for (const auto& pair : pairs) {
        csv.field(pair.run_id).field(pair.t);
        for (double v : pair.p) csv.field(v);
        csv.field(pair.target).endrow();
    }
}

Dataset Dataset::load(const std::string& path) {
    CsvTable t = read_csv(path);
    Dataset d;
    d.n_states = static_cast<int>(t.header.size()) - 3;
    if (d.n_states < 1) throw std::runtime_error("dataset csv has no p_i columns: " + path);
    for (const auto& row : t.rows) {
        Pair pair;
        pair.run_id = static_cast<int>(parse_int(row[0]));
        pair.t = parse_double(row[1]);
        for (int i = 0; i < d.n_states; ++i) pair.p.push_back(parse_double(row[static_cast<size_t>(2 + i)]));
        pair.target = parse_double(row[static_cast<size_t>(2 + d.n_states)]);
        d.pairs.push_back(std::move(pair));
    }
    return d;
}

Arena ArenaSpec::instantiate(uint64_t run_seed) const {
    if (kind == Arena::Kind::multi_room) return generate_multi_room_arena(side_m, run_seed);
    return square_arena(side_m);
}

StateDistribution state_distribution(const std::vector<int>& states, int n_states) {
    if (states.empty()) throw ConfigError("state distribution of an empty swarm");
    StateDistribution d;
    d.values.assign(static_cast<size_t>(n_states), 0.0);
    for (int s : states) {
        if (s < 0 || s >= n_states) throw std::out_of_range("state index out of range");
        d.values[static_cast<size_t>(s)] += 1.0;
    }
    for (double& v : d.values) v /= static_cast<double>(states.size());
    d.normalization = StateDistribution::Normalization::fractions;
    return d;
}

Dataset dataset_from_runs(const std::vector<RunLog>& runs, int n_states, const std::string& split) {
    Dataset d;
    d.n_states = n_states;
    d.split = split;
    for (size_t run = 0; run < runs.size(); ++run) {
        const RunLog& log = runs[run];
        for (size_t i = 0; i < log.times.size(); ++i) {
            Dataset::Pair pair;
            pair.run_id = static_cast<int>(run);
            pair.t = log.times[i];
            pair.p = state_distribution(log.states[i], n_states).values;
            pair.target = log.fitness[i];
            d.pairs.push_back(std::move(pair));
        }
    }
    return d;
}

DataBuildResult build_training_set(const TaskConfig& base, const DataBuildConfig& cfg) {
    if (cfg.n_runs < 1) throw ConfigError("n_runs must be >= 1");
    if (cfg.n_min < 1 || cfg.n_max < cfg.n_min) throw ConfigError("bad swarm size range");
    DataBuildResult out;
    out.runs.resize(static_cast<size_t>(cfg.n_runs));
    const LocalStateSpace space = state_space_for(base.task);
    const ActionSpace actions = action_space_for(base.task);

    parallel_for(cfg.n_runs, cfg.jobs, [&](int i) {
        uint64_t run_seed = mix_seed(cfg.seed, static_cast<uint64_t>(i));
        Rng setup(mix_seed(run_seed, 0x646c6f67ull));
        TaskConfig rc = base;
        rc.n_robots = cfg.n_min + setup.uniform_int(cfg.n_max - cfg.n_min + 1);
        Policy policy = uniform_random_policy(space, actions, mix_seed(run_seed, 0x706f6cull));
        Arena arena = cfg.arena.instantiate(run_seed);
        out.runs[static_cast<size_t>(i)] = run_simulation(rc, policy, arena, run_seed);
    });
    out.dataset = dataset_from_runs(out.runs, base.n_states(), "train");
    return out;
}

std::vector<TransitionEvent> DataBuildResult::all_events() const {
    std::vector<TransitionEvent> all;
    for (const auto& run : runs) all.insert(all.end(), run.events.begin(), run.events.end());
    return all;
}

std::vector<int> DataBuildResult::explored_states(int n_states) const {
    std::vector<char> seen(static_cast<size_t>(n_states), 0);
    for (const auto& run : runs)
        for (const auto& sample : run.states)
            for (int s : sample) seen[static_cast<size_t>(s)] = 1;
    std::vector<int> out;
    for (int s = 0; s < n_states; ++s)
        if (seen[static_cast<size_t>(s)]) out.push_back(s);
    return out;
}

ValidationSets build_validation_sets(const TaskConfig& base, const DataBuildConfig& training_cfg,
                                     int runs_per_set, uint64_t seed) {
    ValidationSets vs;
    DataBuildConfig c = training_cfg;
    c.n_runs = runs_per_set;

    c.seed = mix_seed(seed, 1);
    vs.vs1 = build_training_set(base, c);
    vs.vs1.dataset.split = "vs1";

    c.seed = mix_seed(seed, 2);
    c.arena.kind = Arena::Kind::square;
    c.arena.side_m = 10.0;
    vs.vs2 = build_training_set(base, c);
    vs.vs2.dataset.split = "vs2";

    c.seed = mix_seed(seed, 3);
    c.arena = training_cfg.arena;
    c.arena.kind = Arena::Kind::multi_room;
    vs.vs3 = build_training_set(base, c);
    vs.vs3.dataset.split = "vs3";
    return vs;
}

void save_events_csv(const std::string& path, const std::vector<RunLog>& runs) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    CsvWriter csv(path, {"run_id", "t", "robot_id", "from", "to", "cause"});
    for (size_t run = 0; run < runs.size(); ++run) {
        for (const auto& e : runs[run].events) {
            std::string cause = e.cause == TransitionCause::action ? "a" + std::to_string(e.action)
                                                                   : std::string("env");
            csv.field(static_cast<int>(run))
                .field(e.time_s)
                .field(e.robot)
                .field(e.from_state)
                .field(e.to_state)
                .field(cause)
                .endrow();
        }
    }
}

namespace {

TransitionEvent event_from_row(const std::vector<std::string>& row) {
    TransitionEvent e;
    e.time_s = parse_double(row[1]);
    e.robot = static_cast<int>(parse_int(row[2]));
    e.from_state = static_cast<int>(parse_int(row[3]));
    e.to_state = static_cast<int>(parse_int(row[4]));
    if (row[5] == "env") {
        e.cause = TransitionCause::environment;
    } else {
        e.cause = TransitionCause::action;
        e.action = static_cast<int>(parse_int(row[5].substr(1)));
    }
    return e;
}

}  // namespace

std::vector<TransitionEvent> load_events_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    std::vector<TransitionEvent> events;
    for (const auto& row : t.rows) events.push_back(event_from_row(row));
    return events;
}

std::vector<std::vector<TransitionEvent>> load_event_batches_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    std::vector<std::vector<TransitionEvent>> batches;
    for (const auto& row : t.rows) {
        size_t run = static_cast<size_t>(parse_int(row[0]));
        if (batches.size() <= run) batches.resize(run + 1);
        batches[run].push_back(event_from_row(row));
    }
    return batches;
}

}  // namespace swarmsynth
