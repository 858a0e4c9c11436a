#include "sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "csv.hpp"
#include "json.hpp"

namespace swarmsynth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

int steps_for(double seconds, double dt, const char* what) {
    double raw = seconds / dt;
    int steps = static_cast<int>(std::llround(raw));
    if (steps < 1 || std::abs(raw - steps) > 1e-6)
        throw ConfigError(std::string(what) + " must be an integral number of timesteps");
    return steps;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(a)] = b;
    }
};

}  // namespace

int TaskConfig::n_states() const {
    switch (task) {
        case TaskId::A: return max_neighbors + 1;
        case TaskId::B1:
        case TaskId::B2: return 1 << sectors;
        case TaskId::C: return food_bins;
    }
    return 0;
}

int TaskConfig::n_actions() const {
    switch (task) {
        case TaskId::A:
        case TaskId::C: return 2;
        case TaskId::B1:
        case TaskId::B2: return 8;
    }
    return 0;
}

void TaskConfig::validate() const {
    if (n_robots < 1) throw ConfigError("n_robots must be >= 1");
    if (dt <= 0) throw ConfigError("dt must be positive");
    if (horizon_s <= 0) throw ConfigError("horizon must be positive");
    if (sense_range <= 0) throw ConfigError("sense range must be positive");
    if (decision_hz <= 0 || log_hz <= 0) throw ConfigError("rates must be positive");
    if (max_neighbors < 1) throw ConfigError("max_neighbors must be >= 1");
    if (sectors < 1) throw ConfigError("sectors must be >= 1");
    if (cmd_speed <= 0 || mean_speed <= 0) throw ConfigError("speeds must be positive");
    if (accel_tau <= 0) throw ConfigError("accel_tau must be positive");
    if (turn_time_s <= 0 || straight_time_s <= 0) throw ConfigError("B2 phase times must be positive");
    if (nest_eat_rate < 0 || forage_bite < 0) throw ConfigError("consumption rates must be >= 0");
    if (forage_bite_period_s <= 0) throw ConfigError("forage bite period must be positive");
    if (food_bins < 2 || food_bins % 2 != 0) throw ConfigError("food_bins must be even and >= 2");
    if (food_saturation <= 0) throw ConfigError("food saturation must be positive");
    if (nest_radius <= 0) throw ConfigError("nest radius must be positive");
    if (arena_food_items < 1) throw ConfigError("arena_food_items must be >= 1");
    if (robot_radius <= 0 || repulsion_range <= 0) throw ConfigError("radii must be positive");
    steps_for(1.0 / decision_hz, dt, "decision period");
    steps_for(1.0 / log_hz, dt, "log period");
    steps_for(horizon_s, dt, "horizon");
}

TaskConfig default_config(TaskId task) {
    TaskConfig c;
    c.task = task;
    switch (task) {
        case TaskId::A:
            c.horizon_s = 200.0;
            c.decision_hz = 0.5;  // f_c
            break;
        case TaskId::B1:
        case TaskId::B2:
            c.horizon_s = 200.0;
            c.decision_hz = 0.5;  // f_n
            break;
        case TaskId::C:
            c.horizon_s = 500.0;
            c.decision_hz = 0.1;  // f_n
            break;
    }
    return c;
}

std::string TaskConfig::to_json() const {
    nlohmann::json j;
    j["task"] = task_to_string(task);
    j["n_robots"] = n_robots;
    j["horizon_s"] = horizon_s;
    j["dt"] = dt;
    j["log_hz"] = log_hz;
    j["sense_range"] = sense_range;
    j["decision_hz"] = decision_hz;
    j["max_neighbors"] = max_neighbors;
    j["accel_tau"] = accel_tau;
    j["cmd_speed"] = cmd_speed;
    j["sectors"] = sectors;
    j["mean_speed"] = mean_speed;
    j["turn_time_s"] = turn_time_s;
    j["straight_time_s"] = straight_time_s;
    j["nest_food0"] = nest_food0;
    j["nest_eat_rate"] = nest_eat_rate;
    j["forage_bite"] = forage_bite;
    j["forage_bite_period_s"] = forage_bite_period_s;
    j["food_saturation"] = food_saturation;
    j["food_bins"] = food_bins;
    j["nest_radius"] = nest_radius;
    j["arena_food_items"] = arena_food_items;
    j["explore_heading_period_s"] = explore_heading_period_s;
    j["repulsion_gain"] = repulsion_gain;
    j["repulsion_range"] = repulsion_range;
    j["robot_radius"] = robot_radius;
    j["wall_margin"] = wall_margin;
    return j.dump();
}

TaskConfig TaskConfig::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    TaskConfig c = default_config(task_from_string(j.at("task").get<std::string>()));
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("n_robots", c.n_robots);
    get("horizon_s", c.horizon_s);
    get("dt", c.dt);
    get("log_hz", c.log_hz);
    get("sense_range", c.sense_range);
    get("decision_hz", c.decision_hz);
    get("max_neighbors", c.max_neighbors);
    get("accel_tau", c.accel_tau);
    get("cmd_speed", c.cmd_speed);
    get("sectors", c.sectors);
    get("mean_speed", c.mean_speed);
    get("turn_time_s", c.turn_time_s);
    get("straight_time_s", c.straight_time_s);
    get("nest_food0", c.nest_food0);
    get("nest_eat_rate", c.nest_eat_rate);
    get("forage_bite", c.forage_bite);
    get("forage_bite_period_s", c.forage_bite_period_s);
    get("food_saturation", c.food_saturation);
    get("food_bins", c.food_bins);
    get("nest_radius", c.nest_radius);
    get("arena_food_items", c.arena_food_items);
    get("explore_heading_period_s", c.explore_heading_period_s);
    get("repulsion_gain", c.repulsion_gain);
    get("repulsion_range", c.repulsion_range);
    get("robot_radius", c.robot_radius);
    get("wall_margin", c.wall_margin);
    return c;
}

int cluster_count(const std::vector<std::pair<double, double>>& positions, double r_max) {
    const int n = static_cast<int>(positions.size());
    UnionFind uf(n);
    const double r2 = r_max * r_max;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double dx = positions[static_cast<size_t>(i)].first - positions[static_cast<size_t>(j)].first;
            double dy = positions[static_cast<size_t>(i)].second - positions[static_cast<size_t>(j)].second;
            if (dx * dx + dy * dy <= r2) uf.unite(i, j);
        }
    int clusters = 0;
    for (int i = 0; i < n; ++i)
        if (uf.find(i) == i) ++clusters;
    return clusters;
}

double fitness_aggregation(const std::vector<std::pair<double, double>>& positions, double r_max) {
    if (positions.empty()) throw ConfigError("fitness_aggregation needs at least one robot");
    return static_cast<double>(positions.size()) / cluster_count(positions, r_max);
}

int sense_neighbors_count(size_t self, const std::vector<std::pair<double, double>>& positions,
                          double r_max, int m_max) {
    int count = 0;
    const double r2 = r_max * r_max;
    for (size_t i = 0; i < positions.size(); ++i) {
        if (i == self) continue;
        double dx = positions[i].first - positions[self].first;
        double dy = positions[i].second - positions[self].second;
        if (dx * dx + dy * dy <= r2) ++count;
    }
    return std::min(count, m_max);
}

int sense_sectors(size_t self, const std::vector<std::pair<double, double>>& positions,
                  double heading, double r_max, int sectors) {
    int mask = 0;
    const double r2 = r_max * r_max;
    const double width = kTwoPi / sectors;
    for (size_t i = 0; i < positions.size(); ++i) {
        if (i == self) continue;
        double dx = positions[i].first - positions[self].first;
        double dy = positions[i].second - positions[self].second;
        if (dx * dx + dy * dy > r2) continue;
        double bearing = wrap_angle(std::atan2(dy, dx) - heading);
        int j = std::min(sectors - 1, static_cast<int>(bearing / width));
        mask |= 1 << j;
    }
    return mask;
}

int sense_nest_difference(double food_at_arrival, double food_at_departure, double f_max, int n_bins) {
    double fg = food_at_arrival - food_at_departure;
    fg = std::clamp(fg, -f_max, f_max);
    int bin = static_cast<int>(std::floor((fg + f_max) * n_bins / (2.0 * f_max)));
    return std::clamp(bin, 0, n_bins - 1);
}

Simulator::Simulator(const TaskConfig& cfg, const Policy& policy, const Arena& arena, uint64_t seed)
    : cfg_(cfg), arena_(arena), rng_(mix_seed(seed, 0x73696dull)) {
    cfg_.validate();
    if (policy.n_states() != cfg_.n_states() || policy.n_actions() != cfg_.n_actions())
        throw ConfigError("policy shape does not match the task config");
    decision_period_ = steps_for(1.0 / cfg_.decision_hz, cfg_.dt, "decision period");
    heading_period_ = steps_for(cfg_.explore_heading_period_s, cfg_.dt, "explore heading period");
    policies_.assign(static_cast<size_t>(cfg_.n_robots), policy);
    init_robots();
    compute_initial_states();
    for (int i = 0; i < cfg_.n_robots; ++i) decide(i);  // t = 0 is a decision boundary
}

void Simulator::set_policy(const Policy& policy) {
    for (int i = 0; i < cfg_.n_robots; ++i) set_policy(i, policy);
}

void Simulator::set_policy(int robot, const Policy& policy) {
    if (policy.n_states() != cfg_.n_states() || policy.n_actions() != cfg_.n_actions())
        throw ConfigError("policy shape does not match the task config");
    policies_.at(static_cast<size_t>(robot)) = policy;
}

double Simulator::time() const { return static_cast<double>(tick_) * cfg_.dt; }

bool Simulator::point_in_bounds(double x, double y, double margin) const {
    return x >= margin && y >= margin && x <= arena_.side_m - margin && y <= arena_.side_m - margin;
}

std::pair<double, double> Simulator::random_free_point(double margin) {
    for (int tries = 0; tries < 1000; ++tries) {
        double x = rng_.uniform(margin, arena_.side_m - margin);
        double y = rng_.uniform(margin, arena_.side_m - margin);
        bool clear = true;
        for (const auto& w : arena_.walls) {
            double d;
            if (w.vertical()) {
                double lo = std::min(w.y1, w.y2), hi = std::max(w.y1, w.y2);
                d = (y >= lo && y <= hi) ? std::abs(x - w.x1)
                                         : std::hypot(x - w.x1, y - std::clamp(y, lo, hi));
            } else {
                double lo = std::min(w.x1, w.x2), hi = std::max(w.x1, w.x2);
                d = (x >= lo && x <= hi) ? std::abs(y - w.y1)
                                         : std::hypot(x - std::clamp(x, lo, hi), y - w.y1);
            }
            if (d < margin) {
                clear = false;
                break;
            }
        }
        if (clear) return {x, y};
    }
    return {arena_.side_m / 2, arena_.side_m / 2};
}

std::pair<double, double> Simulator::random_food_point() {
    const double cx = arena_.side_m / 2, cy = arena_.side_m / 2;
    for (int tries = 0; tries < 1000; ++tries) {
        auto p = random_free_point(cfg_.robot_radius);
        if (std::hypot(p.first - cx, p.second - cy) > cfg_.nest_radius) return p;
    }
    return {cfg_.robot_radius, cfg_.robot_radius};
}

void Simulator::init_robots() {
    robots_.assign(static_cast<size_t>(cfg_.n_robots), Robot{});
    const double cx = arena_.side_m / 2, cy = arena_.side_m / 2;
    for (auto& r : robots_) {
        if (cfg_.task == TaskId::C) {
            double ang = rng_.uniform(0.0, kTwoPi);
            double rad = cfg_.nest_radius * std::sqrt(rng_.uniform());
            r.x = cx + rad * std::cos(ang);
            r.y = cy + rad * std::sin(ang);
            r.at_nest = true;
            r.park_x = r.x;
            r.park_y = r.y;
            r.prev_obs_food = cfg_.nest_food0;
        } else {
            auto p = random_free_point(cfg_.robot_radius);
            r.x = p.first;
            r.y = p.second;
        }
        r.heading = rng_.uniform(0.0, kTwoPi);
    }
    if (cfg_.task == TaskId::C) {
        nest_food_ = cfg_.nest_food0;
        food_.clear();
        for (int i = 0; i < cfg_.arena_food_items; ++i) food_.push_back(random_food_point());
    }
}

void Simulator::compute_initial_states() {
    auto pos = positions();
    for (size_t i = 0; i < robots_.size(); ++i) {
        switch (cfg_.task) {
            case TaskId::A:
                robots_[i].state = sense_neighbors_count(i, pos, cfg_.sense_range, cfg_.max_neighbors);
                break;
            case TaskId::B1:
            case TaskId::B2:
                robots_[i].state =
                    sense_sectors(i, pos, robots_[i].heading, cfg_.sense_range, cfg_.sectors);
                break;
            case TaskId::C:
                robots_[i].state = sense_nest_difference(cfg_.nest_food0, cfg_.nest_food0,
                                                         cfg_.food_saturation, cfg_.food_bins);
                break;
        }
    }
}

void Simulator::record_transition(int robot, int from, int to) {
    TransitionEvent e;
    e.robot = robot;
    e.from_state = from;
    e.to_state = to;
    e.time_s = time();
    const Robot& r = robots_[static_cast<size_t>(robot)];
    switch (cfg_.task) {
        case TaskId::A:
            // "stay" is no action; changes while staying come from the others.
            if (r.action == 0) {
                e.cause = TransitionCause::action;
                e.action = 0;
            } else {
                e.cause = TransitionCause::environment;
            }
            break;
        case TaskId::B1:
        case TaskId::B2:
            e.cause = TransitionCause::action;  // these robots are always acting
            e.action = r.action;
            break;
        case TaskId::C:
            // Arrival observations are attributed to "explore" where they are
            // emitted; everything else observed at the nest is environmental.
            e.cause = TransitionCause::environment;
            break;
    }
    events_.push_back(e);
}

std::pair<double, double> Simulator::repulsion(const Robot& r) const {
    double fx = 0, fy = 0;
    for (const auto& o : robots_) {
        if (&o == &r) continue;
        double dx = r.x - o.x, dy = r.y - o.y;
        double d = std::hypot(dx, dy);
        if (d >= cfg_.repulsion_range || d <= 0.0) continue;
        double mag = cfg_.repulsion_gain * (1.0 / std::max(d, 1e-3) - 1.0 / cfg_.repulsion_range);
        fx += mag * dx / d;
        fy += mag * dy / d;
    }
    return {fx, fy};
}

bool Simulator::near_wall(const Robot& r, double& away_dir) const {
    double best_d = cfg_.wall_margin;
    bool found = false;
    auto consider = [&](double d, double dir) {
        if (d < best_d) {
            best_d = d;
            away_dir = dir;
            found = true;
        }
    };
    consider(r.x, 0.0);
    consider(arena_.side_m - r.x, 3.14159265358979323846);
    consider(r.y, 1.5707963267948966);
    consider(arena_.side_m - r.y, -1.5707963267948966);
    for (const auto& w : arena_.walls) {
        if (w.vertical()) {
            double lo = std::min(w.y1, w.y2), hi = std::max(w.y1, w.y2);
            if (r.y >= lo - cfg_.wall_margin && r.y <= hi + cfg_.wall_margin)
                consider(std::abs(r.x - w.x1), r.x >= w.x1 ? 0.0 : 3.14159265358979323846);
        } else {
            double lo = std::min(w.x1, w.x2), hi = std::max(w.x1, w.x2);
            if (r.x >= lo - cfg_.wall_margin && r.x <= hi + cfg_.wall_margin)
                consider(std::abs(r.y - w.y1), r.y >= w.y1 ? 1.5707963267948966 : -1.5707963267948966);
        }
    }
    return found;
}

void Simulator::move_with_walls(Robot& r, double nx, double ny) {
    const double m = cfg_.robot_radius;
    bool flip_x = false, flip_y = false;
    if (nx < m) {
        nx = 2 * m - nx;
        flip_x = true;
    } else if (nx > arena_.side_m - m) {
        nx = 2 * (arena_.side_m - m) - nx;
        flip_x = true;
    }
    if (ny < m) {
        ny = 2 * m - ny;
        flip_y = true;
    } else if (ny > arena_.side_m - m) {
        ny = 2 * (arena_.side_m - m) - ny;
        flip_y = true;
    }
    for (const auto& w : arena_.walls) {
        if (w.vertical()) {
            double lo = std::min(w.y1, w.y2) - m, hi = std::max(w.y1, w.y2) + m;
            if ((r.x - w.x1) * (nx - w.x1) < 0 && std::max(r.y, ny) >= lo && std::min(r.y, ny) <= hi) {
                nx = 2 * w.x1 - nx;
                flip_x = true;
            }
        } else {
            double lo = std::min(w.x1, w.x2) - m, hi = std::max(w.x1, w.x2) + m;
            if ((r.y - w.y1) * (ny - w.y1) < 0 && std::max(r.x, nx) >= lo && std::min(r.x, nx) <= hi) {
                ny = 2 * w.y1 - ny;
                flip_y = true;
            }
        }
    }
    // Clamp in case a double reflection overshot (tight corners).
    nx = std::clamp(nx, m, arena_.side_m - m);
    ny = std::clamp(ny, m, arena_.side_m - m);
    r.x = nx;
    r.y = ny;
    if (flip_x) r.vx = -r.vx;
    if (flip_y) r.vy = -r.vy;
    if (flip_x || flip_y) {
        if (cfg_.task == TaskId::A) {
            double dir_x = std::cos(r.move_dir), dir_y = std::sin(r.move_dir);
            if (flip_x) dir_x = -dir_x;
            if (flip_y) dir_y = -dir_y;
            r.move_dir = wrap_angle(std::atan2(dir_y, dir_x));
        } else {
            double hx = std::cos(r.heading), hy = std::sin(r.heading);
            if (flip_x) hx = -hx;
            if (flip_y) hy = -hy;
            r.heading = wrap_angle(std::atan2(hy, hx));
            if (cfg_.task == TaskId::C && r.carrying)
                r.detour_until = time() + 1.5;  // bounce off, then re-aim at the nest
        }
    }
}

void Simulator::physics_step(Robot& r) {
    const double dt = cfg_.dt;
    switch (cfg_.task) {
        case TaskId::A: {
            auto [rx, ry] = repulsion(r);
            double cx = 0, cy = 0;
            if (r.action == 0) {  // move
                cx = cfg_.cmd_speed * std::cos(r.move_dir);
                cy = cfg_.cmd_speed * std::sin(r.move_dir);
            }
            double dx = (cx + rx - r.vx) * dt / cfg_.accel_tau;
            double dy = (cy + ry - r.vy) * dt / cfg_.accel_tau;
            r.vx += dx;
            r.vy += dy;
            move_with_walls(r, r.x + r.vx * dt, r.y + r.vy * dt);
            break;
        }
        case TaskId::B1:
        case TaskId::B2: {
            const auto& actions = action_space_for(cfg_.task).values;
            double turn = actions[static_cast<size_t>(r.action)];
            double speed = cfg_.task == TaskId::B1 ? cfg_.cmd_speed : cfg_.mean_speed * std::abs(turn);
            if (cfg_.task == TaskId::B2 && r.phase_s >= cfg_.turn_time_s) turn = 0.0;
            double away;
            if (near_wall(r, away)) {
                // Rotate away from the wall when heading into it.
                double hx = std::cos(r.heading), hy = std::sin(r.heading);
                double ax = std::cos(away), ay = std::sin(away);
                if (hx * ax + hy * ay < 0.0) {
                    double diff = std::remainder(away - r.heading, kTwoPi);
                    turn = diff >= 0 ? 1.0 : -1.0;
                    if (cfg_.task == TaskId::B2) speed = cfg_.mean_speed;
                }
            }
            r.heading = wrap_angle(r.heading + turn * dt);
            auto [rx, ry] = repulsion(r);
            r.vx = speed * std::cos(r.heading) + rx;
            r.vy = speed * std::sin(r.heading) + ry;
            r.phase_s += dt;
            move_with_walls(r, r.x + r.vx * dt, r.y + r.vy * dt);
            break;
        }
        case TaskId::C: {
            if (r.at_nest) {
                r.vx = r.vy = 0;
                r.x = r.park_x;
                r.y = r.park_y;
                return;
            }
            if (r.searching && time() >= r.next_heading_redraw) {
                r.heading = rng_.uniform(0.0, kTwoPi);
                r.next_heading_redraw = time() + cfg_.explore_heading_period_s;
            }
            if (r.carrying && time() >= r.detour_until) {
                r.heading = std::atan2(arena_.side_m / 2 - r.y, arena_.side_m / 2 - r.x);
            }
            auto [rx, ry] = repulsion(r);
            r.vx = cfg_.cmd_speed * std::cos(r.heading) + rx;
            r.vy = cfg_.cmd_speed * std::sin(r.heading) + ry;
            move_with_walls(r, r.x + r.vx * dt, r.y + r.vy * dt);
            break;
        }
    }
}

void Simulator::update_states_after_motion(const std::vector<int>& order) {
    auto pos = positions();
    for (int idx : order) {
        Robot& r = robots_[static_cast<size_t>(idx)];
        int next;
        if (cfg_.task == TaskId::A)
            next = sense_neighbors_count(static_cast<size_t>(idx), pos, cfg_.sense_range,
                                         cfg_.max_neighbors);
        else
            next = sense_sectors(static_cast<size_t>(idx), pos, r.heading, cfg_.sense_range,
                                 cfg_.sectors);
        if (next != r.state) {
            record_transition(idx, r.state, next);
            r.state = next;
            r.needs_decision = true;  // a state change re-triggers the policy
        }
    }
}

void Simulator::task_c_step(const std::vector<int>& order) {
    const double cx = arena_.side_m / 2, cy = arena_.side_m / 2;
    for (int idx : order) {
        Robot& r = robots_[static_cast<size_t>(idx)];
        if (r.searching) {
            r.search_accum += cfg_.dt;
            while (r.search_accum >= cfg_.forage_bite_period_s) {
                r.search_accum -= cfg_.forage_bite_period_s;
                nest_food_ = std::max(0.0, nest_food_ - cfg_.forage_bite);
            }
            int found = -1;
            double best = cfg_.sense_range;
            for (size_t f = 0; f < food_.size(); ++f) {
                double d = std::hypot(food_[f].first - r.x, food_[f].second - r.y);
                if (d <= best) {
                    best = d;
                    found = static_cast<int>(f);
                }
            }
            if (found >= 0) {
                food_[static_cast<size_t>(found)] = random_food_point();  // constant arena food
                r.searching = false;
                r.carrying = true;
                r.detour_until = -1;
                r.heading = std::atan2(cy - r.y, cx - r.x);
            }
        } else if (r.carrying) {
            if (std::hypot(r.x - cx, r.y - cy) <= cfg_.nest_radius) {
                nest_food_ += 1.0;
                double arrival_obs = nest_food_;
                int next = sense_nest_difference(arrival_obs, r.depart_food, cfg_.food_saturation,
                                                 cfg_.food_bins);
                if (next != r.state) {
                    TransitionEvent e;
                    e.robot = idx;
                    e.from_state = r.state;
                    e.to_state = next;
                    e.cause = TransitionCause::action;
                    e.action = 0;  // the round trip is the effect of "explore"
                    e.time_s = time();
                    events_.push_back(e);
                    r.state = next;
                    r.needs_decision = true;
                }
                r.prev_obs_food = arrival_obs;
                r.carrying = false;
                r.at_nest = true;
                r.park_x = r.x;
                r.park_y = r.y;
                r.vx = r.vy = 0;
            }
        }
    }
    int at_nest = 0;
    for (const auto& r : robots_)
        if (r.at_nest) ++at_nest;
    nest_food_ = std::max(0.0, nest_food_ - cfg_.nest_eat_rate * cfg_.dt * at_nest);
}

void Simulator::decide(int robot_index) {
    Robot& r = robots_[static_cast<size_t>(robot_index)];
    r.needs_decision = false;
    if (cfg_.task == TaskId::C && !r.at_nest) return;  // choices only happen at the nest
    int action = sample_index(policies_[static_cast<size_t>(robot_index)].row(r.state), rng_);
    r.action = action;
    switch (cfg_.task) {
        case TaskId::A:
            if (action == 0) r.move_dir = rng_.uniform(0.0, kTwoPi);
            break;
        case TaskId::B1:
            break;
        case TaskId::B2:
            r.phase_s = 0.0;
            break;
        case TaskId::C:
            if (action == 0) {  // explore: leave and stay out until food is found
                r.at_nest = false;
                r.searching = true;
                r.carrying = false;
                r.depart_food = nest_food_;
                r.search_accum = 0.0;
                r.heading = rng_.uniform(0.0, kTwoPi);
                r.next_heading_redraw = time() + cfg_.explore_heading_period_s;
            }
            break;
    }
}

void Simulator::step() {
    std::vector<int> order(static_cast<size_t>(cfg_.n_robots));
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    for (int idx : order) physics_step(robots_[static_cast<size_t>(idx)]);
    ++tick_;
    if (cfg_.task == TaskId::C)
        task_c_step(order);
    else
        update_states_after_motion(order);
    const bool boundary = (tick_ % decision_period_) == 0;
    if (boundary) {
        for (size_t i = 0; i < robots_.size(); ++i) {
            Robot& r = robots_[i];
            if (cfg_.task == TaskId::C) {
                if (!r.at_nest) continue;
                // Reassessment: compare the nest stock against the last look.
                double obs = nest_food_;
                int next = sense_nest_difference(obs, r.prev_obs_food, cfg_.food_saturation,
                                                 cfg_.food_bins);
                if (next != r.state) {
                    record_transition(static_cast<int>(i), r.state, next);
                    r.state = next;
                }
                r.prev_obs_food = obs;
                r.needs_decision = true;
            } else {
                r.needs_decision = true;
            }
        }
    }
    for (int i = 0; i < cfg_.n_robots; ++i)
        if (robots_[static_cast<size_t>(i)].needs_decision) decide(i);
}

void Simulator::run_for(double seconds) {
    int steps = steps_for(seconds, cfg_.dt, "run_for duration");
    for (int s = 0; s < steps; ++s) step();
}

double Simulator::global_fitness() const {
    if (cfg_.task == TaskId::C) return nest_food_ - cfg_.nest_food0;
    return fitness_aggregation(positions(), cfg_.sense_range);
}

std::vector<int> Simulator::local_states() const {
    std::vector<int> s;
    s.reserve(robots_.size());
    for (const auto& r : robots_) s.push_back(r.state);
    return s;
}

std::vector<std::pair<double, double>> Simulator::positions() const {
    std::vector<std::pair<double, double>> p;
    p.reserve(robots_.size());
    for (const auto& r : robots_) p.push_back({r.x, r.y});
    return p;
}

bool Simulator::all_in_bounds() const {
    for (const auto& r : robots_)
        if (!point_in_bounds(r.x, r.y, 0.0)) return false;
    return true;
}

RunLog run_simulation(const TaskConfig& cfg, const Policy& policy, const Arena& arena, uint64_t seed) {
    Simulator sim(cfg, policy, arena, seed);
    const int log_every = steps_for(1.0 / cfg.log_hz, cfg.dt, "log period");
    const int total_steps = steps_for(cfg.horizon_s, cfg.dt, "horizon");

    RunLog log;
    log.task = cfg.task;
    log.n_robots = cfg.n_robots;
    log.seed = seed;
    log.policy_hash = policy.hash();
    log.config = cfg;
    log.arena = arena;

    auto sample = [&]() {
        log.times.push_back(sim.time());
        log.fitness.push_back(sim.global_fitness());
        log.states.push_back(sim.local_states());
    };
    sample();
    for (int s = 1; s <= total_steps; ++s) {
        sim.step();
        if (s % log_every == 0) sample();
    }
    log.events = sim.events();
    return log;
}

uint64_t RunLog::checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a64_append(h, &seed, sizeof(seed));
    h = fnv1a64_append(h, &policy_hash, sizeof(policy_hash));
    h = fnv1a64_append(h, times.data(), times.size() * sizeof(double));
    h = fnv1a64_append(h, fitness.data(), fitness.size() * sizeof(double));
    for (const auto& row : states) h = fnv1a64_append(h, row.data(), row.size() * sizeof(int));
    for (const auto& e : events) {
        h = fnv1a64_append(h, &e.robot, sizeof(e.robot));
        h = fnv1a64_append(h, &e.from_state, sizeof(e.from_state));
        h = fnv1a64_append(h, &e.to_state, sizeof(e.to_state));
        int cause = e.cause == TransitionCause::action ? 1 : 0;
        h = fnv1a64_append(h, &cause, sizeof(cause));
        h = fnv1a64_append(h, &e.action, sizeof(e.action));
        h = fnv1a64_append(h, &e.time_s, sizeof(e.time_s));
    }
    return h;
}

void RunLog::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    {
        CsvWriter csv(dir + "/fitness.csv", {"t", "F_g"});
        for (size_t i = 0; i < times.size(); ++i) {
            csv.field(times[i]).field(fitness[i]).endrow();
        }
    }
    {
        CsvWriter csv(dir + "/states.csv", {"t", "robot_id", "state"});
        for (size_t i = 0; i < times.size(); ++i)
            for (size_t r = 0; r < states[i].size(); ++r)
                csv.field(times[i]).field(static_cast<int>(r)).field(states[i][r]).endrow();
    }
    {
        CsvWriter csv(dir + "/events.csv", {"t", "robot_id", "from", "to", "cause"});
        for (const auto& e : events) {
            std::string cause = e.cause == TransitionCause::action
                                    ? "a" + std::to_string(e.action)
                                    : std::string("env");
            csv.field(e.time_s).field(e.robot).field(e.from_state).field(e.to_state).field(cause).endrow();
        }
    }
    nlohmann::json meta;
    meta["task"] = task_to_string(task);
    meta["n_robots"] = n_robots;
    meta["seed"] = seed;
    meta["policy_hash"] = hex64(policy_hash);
    meta["config"] = nlohmann::json::parse(config.to_json());
    meta["arena"] = nlohmann::json::parse(arena.to_json());
    std::ofstream out(dir + "/meta.json");
    out << meta.dump(2) << '\n';
}

RunLog RunLog::load(const std::string& dir) {
    RunLog log;
    std::ifstream meta_in(dir + "/meta.json");
    if (!meta_in) throw std::runtime_error("cannot open " + dir + "/meta.json");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    log.task = task_from_string(meta.at("task").get<std::string>());
    log.n_robots = meta.at("n_robots").get<int>();
    log.seed = meta.at("seed").get<uint64_t>();
    log.policy_hash = std::stoull(meta.at("policy_hash").get<std::string>(), nullptr, 16);
    log.config = TaskConfig::from_json(meta.at("config").dump());
    log.arena = Arena::from_json(meta.at("arena").dump());

    CsvTable fit = read_csv(dir + "/fitness.csv");
    for (const auto& row : fit.rows) {
        log.times.push_back(parse_double(row[0]));
        log.fitness.push_back(parse_double(row[1]));
    }
    log.states.assign(log.times.size(), std::vector<int>(static_cast<size_t>(log.n_robots), 0));
    CsvTable st = read_csv(dir + "/states.csv");
    size_t sample = 0;
    int seen_in_sample = 0;
    for (const auto& row : st.rows) {
        int robot = static_cast<int>(parse_int(row[1]));
        log.states[sample][static_cast<size_t>(robot)] = static_cast<int>(parse_int(row[2]));
        if (++seen_in_sample == log.n_robots) {
            seen_in_sample = 0;
            ++sample;
        }
    }
    CsvTable ev = read_csv(dir + "/events.csv");
    for (const auto& row : ev.rows) {
        TransitionEvent e;
        e.time_s = parse_double(row[0]);
        e.robot = static_cast<int>(parse_int(row[1]));
        e.from_state = static_cast<int>(parse_int(row[2]));
        e.to_state = static_cast<int>(parse_int(row[3]));
        if (row[4] == "env") {
            e.cause = TransitionCause::environment;
        } else {
            e.cause = TransitionCause::action;
            e.action = static_cast<int>(parse_int(row[4].substr(1)));
        }
        log.events.push_back(e);
    }
    return log;
}

}  // namespace swarmsynth
