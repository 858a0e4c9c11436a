#include "arena.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "core.hpp"
#include "json.hpp"

namespace swarmsynth {

std::string Arena::to_json() const {
    nlohmann::json j;
    j["kind"] = kind == Kind::square ? "square" : "multi_room";
    j["side_m"] = side_m;
    j["seed"] = seed;
    nlohmann::json walls_j = nlohmann::json::array();
    for (const auto& w : walls) walls_j.push_back({w.x1, w.y1, w.x2, w.y2});
    j["walls"] = walls_j;
    return j.dump();
}

Arena Arena::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    Arena a;
    a.kind = j.at("kind").get<std::string>() == "multi_room" ? Kind::multi_room : Kind::square;
    a.side_m = j.at("side_m").get<double>();
    a.seed = j.value("seed", 0ull);
    for (const auto& w : j.at("walls")) {
        a.walls.push_back(
            {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()});
    }
    return a;
}

Arena square_arena(double side_m) {
    if (side_m <= 0.0) throw ConfigError("arena side must be positive");
    Arena a;
    a.kind = Arena::Kind::square;
    a.side_m = side_m;
    return a;
}

namespace {

bool cell_blocked(const Arena& arena, double cell, int cx, int cy) {
    double x0 = cx * cell, x1 = (cx + 1) * cell;
    double y0 = cy * cell, y1 = (cy + 1) * cell;
    for (const auto& w : arena.walls) {
        if (w.vertical()) {
            double lo = std::min(w.y1, w.y2), hi = std::max(w.y1, w.y2);
            if (w.x1 >= x0 && w.x1 <= x1 && hi >= y0 && lo <= y1) return true;
        } else {
            double lo = std::min(w.x1, w.x2), hi = std::max(w.x1, w.x2);
            if (w.y1 >= y0 && w.y1 <= y1 && hi >= x0 && lo <= x1) return true;
        }
    }
    return false;
}

}  // namespace

bool arena_fully_reachable(const Arena& arena, double cell_m) {
    const int n = std::max(1, static_cast<int>(std::ceil(arena.side_m / cell_m)));
    std::vector<char> blocked(static_cast<size_t>(n) * n, 0);
    std::vector<char> seen(static_cast<size_t>(n) * n, 0);
    int free_cells = 0;
    for (int cy = 0; cy < n; ++cy)
        for (int cx = 0; cx < n; ++cx) {
            bool b = cell_blocked(arena, arena.side_m / n, cx, cy);
            blocked[static_cast<size_t>(cy) * n + cx] = b ? 1 : 0;
            if (!b) ++free_cells;
        }
    if (free_cells == 0) return false;

    std::queue<std::pair<int, int>> q;
    for (int cy = 0; cy < n && q.empty(); ++cy)
        for (int cx = 0; cx < n && q.empty(); ++cx)
            if (!blocked[static_cast<size_t>(cy) * n + cx]) {
                q.push({cx, cy});
                seen[static_cast<size_t>(cy) * n + cx] = 1;
            }
    int reached = 0;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        ++reached;
        for (int d = 0; d < 4; ++d) {
            int nx = cx + dx[d], ny = cy + dy[d];
            if (nx < 0 || ny < 0 || nx >= n || ny >= n) continue;
            size_t idx = static_cast<size_t>(ny) * n + nx;
            if (blocked[idx] || seen[idx]) continue;
            seen[idx] = 1;
            q.push({nx, ny});
        }
    }
    return reached == free_cells;
}

Arena generate_multi_room_arena(double side_m, uint64_t seed) {
    if (side_m <= 0.0) throw ConfigError("arena side must be positive");
    Rng rng(mix_seed(seed, 0x6172656eull));
    Arena arena;
    arena.kind = Arena::Kind::multi_room;
    arena.side_m = side_m;
    arena.seed = seed;

    const double min_door = 1.5, max_door = 3.0;  // >= 4x robot radius with room to spare
    for (int max_walls = 3; max_walls >= 1; --max_walls) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            Arena candidate = arena;
            candidate.walls.clear();
            int n_walls = 1 + rng.uniform_int(max_walls);
            for (int w = 0; w < n_walls; ++w) {
                bool vertical = rng.uniform() < 0.5;
                double pos = rng.uniform(0.25 * side_m, 0.75 * side_m);
                double door_w = rng.uniform(min_door, std::min(max_door, side_m * 0.4));
                double door_lo = rng.uniform(0.0, side_m - door_w);
                double door_hi = door_lo + door_w;
                auto add = [&](double lo, double hi) {
                    if (hi - lo < 0.1) return;
                    if (vertical)
                        candidate.walls.push_back({pos, lo, pos, hi});
                    else
                        candidate.walls.push_back({lo, pos, hi, pos});
                };
                add(0.0, door_lo);
                add(door_hi, side_m);
            }
            if (arena_fully_reachable(candidate, 0.25)) return candidate;
        }
    }
    arena.walls.clear();  // retry budget exhausted; degenerate to a square
    return arena;
}

}  // namespace swarmsynth
