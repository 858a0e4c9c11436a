#pragma once

#include "arena.hpp"
#include "core.hpp"
#include "transition.hpp"

namespace swarmsynth {

// Per-task simulation parameters. Defaults mirror the published case-study
// values; anything the source leaves open (sensing radius, repulsion law,
// nest geometry, arena food count) is exposed here.
struct TaskConfig {
    TaskId task = TaskId::A;
    int n_robots = 1;
    double horizon_s = 200.0;
    double dt = 0.02;
    double log_hz = 2.0;
    double sense_range = 2.0;    // r_max, also food sensing range in C
    double decision_hz = 0.5;    // f_c (A) / f_n (B1, B2, C)

    // task A
    int max_neighbors = 7;       // m_max; N = m_max + 1
    double accel_tau = 0.5;      // first-order velocity lag

    // tasks A, B1 (forward speed), C (travel speed)
    double cmd_speed = 0.5;

    // tasks B1/B2
    int sectors = 4;             // q; N = 2^q
    double mean_speed = 0.5;     // B2: v = mean_speed * |a_k|
    double turn_time_s = 1.0;    // B2 t1
    double straight_time_s = 1.0;  // B2 t2

    // task C
    double nest_food0 = 15.0;    // f(0)
    double nest_eat_rate = 0.02;  // e_n, food/s per robot at nest
    double forage_bite = 0.1;    // e_f
    double forage_bite_period_s = 10.0;  // t_c
    double food_saturation = 5.0;  // f_max
    int food_bins = 30;          // |S|
    double nest_radius = 3.0;
    int arena_food_items = 30;
    double explore_heading_period_s = 2.0;

    // shared physics
    double repulsion_gain = 1.0;   // k_rep
    double repulsion_range = 0.5;  // d_safe
    double robot_radius = 0.15;
    double wall_margin = 0.6;      // B1/B2 rotate-away trigger distance

    int n_states() const;
    int n_actions() const;
    void validate() const;
    std::string to_json() const;
    static TaskConfig from_json(const std::string& json);
};

TaskConfig default_config(TaskId task);

struct RunLog {
    TaskId task = TaskId::A;
    int n_robots = 0;
    uint64_t seed = 0;
    uint64_t policy_hash = 0;
    TaskConfig config;
    Arena arena;
    std::vector<double> times;               // 2 Hz timestamps, t = 0 included
    std::vector<double> fitness;             // F_g(t), aligned with times
    std::vector<std::vector<int>> states;    // [sample][robot] local states
    std::vector<TransitionEvent> events;

    uint64_t checksum() const;
    void save(const std::string& dir) const;  // fitness.csv states.csv events.csv meta.json
    static RunLog load(const std::string& dir);
};

// n / (number of connected components of the proximity graph); edges link
// robots at distance <= r_max.
double fitness_aggregation(const std::vector<std::pair<double, double>>& positions, double r_max);
int cluster_count(const std::vector<std::pair<double, double>>& positions, double r_max);

// Task A sensor: neighbours within range, capped at m_max.
int sense_neighbors_count(size_t self, const std::vector<std::pair<double, double>>& positions,
                          double r_max, int m_max);
// Tasks B1/B2 sensor: bitmask of body-frame sectors holding a neighbour.
int sense_sectors(size_t self, const std::vector<std::pair<double, double>>& positions,
                  double heading, double r_max, int sectors);
// Task C sensor: clamped food difference mapped to an even bin grid.
int sense_nest_difference(double food_at_arrival, double food_at_departure, double f_max,
                          int n_bins);

// Fixed-timestep world. One instance simulates one run; robots update
// sequentially in a seeded shuffled order, so a (config, policy, seed)
// triple always reproduces the same trajectory.
class Simulator {
public:
    Simulator(const TaskConfig& cfg, const Policy& policy, const Arena& arena, uint64_t seed);

    void step();                  // advance one dt
    void run_for(double seconds);

    double time() const;
    double global_fitness() const;
    const TaskConfig& config() const { return cfg_; }
    std::vector<int> local_states() const;
    const std::vector<TransitionEvent>& events() const { return events_; }

    void set_policy(const Policy& policy);             // all robots
    void set_policy(int robot, const Policy& policy);  // online heterogeneous mode

    // Introspection for tests and invariants.
    std::vector<std::pair<double, double>> positions() const;
    bool all_in_bounds() const;
    double nest_food() const { return nest_food_; }
    int arena_food_count() const { return static_cast<int>(food_.size()); }

private:
    struct Robot {
        double x = 0, y = 0, vx = 0, vy = 0, heading = 0;
        int state = 0;
        int action = 0;
        bool needs_decision = false;
        // task A
        double move_dir = 0;      // heading while "move" is active
        // task B2
        double phase_s = 0;       // time since last action pick
        // task C
        bool at_nest = true, searching = false, carrying = false;
        double depart_food = 0, prev_obs_food = 0, search_accum = 0;
        double park_x = 0, park_y = 0;
        double detour_until = -1;
        double next_heading_redraw = 0;
    };

    void init_robots();
    void compute_initial_states();
    void decide(int robot_index);
    void physics_step(Robot& r);
    void move_with_walls(Robot& r, double nx, double ny);
    void update_states_after_motion(const std::vector<int>& order);
    void task_c_step(const std::vector<int>& order);
    void record_transition(int robot, int from, int to);
    std::pair<double, double> repulsion(const Robot& r) const;
    std::pair<double, double> random_free_point(double margin);
    std::pair<double, double> random_food_point();
    bool near_wall(const Robot& r, double& away_dir) const;
    bool point_in_bounds(double x, double y, double margin) const;

    TaskConfig cfg_;
    Arena arena_;
    Rng rng_;
    std::vector<Policy> policies_;  // one per robot
    std::vector<Robot> robots_;
    std::vector<std::pair<double, double>> food_;
    std::vector<TransitionEvent> events_;
    double nest_food_ = 0.0;
    int64_t tick_ = 0;
    int decision_period_ = 1;
    int heading_period_ = 1;
};

RunLog run_simulation(const TaskConfig& cfg, const Policy& policy, const Arena& arena, uint64_t seed);

}  // namespace swarmsynth
