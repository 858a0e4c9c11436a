#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace swarmsynth {

// Axis-aligned interior wall piece; the outer boundary is implicit.
struct WallSegment {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    bool vertical() const { return x1 == x2; }
};

struct Arena {
    enum class Kind { square, multi_room };
    Kind kind = Kind::square;
    double side_m = 20.0;
    uint64_t seed = 0;  // used for multi_room generation
    std::vector<WallSegment> walls;

    std::string to_json() const;
    static Arena from_json(const std::string& json);
};

Arena square_arena(double side_m);

// 1-3 interior walls with door gaps, regenerated until a grid flood fill
// confirms every free cell is reachable. Falls back to fewer walls (and
// finally to a plain square) if the retry budget runs out.
Arena generate_multi_room_arena(double side_m, uint64_t seed);

// Flood-fill reachability at the given cell size; exposed for tests.
bool arena_fully_reachable(const Arena& arena, double cell_m);

}  // namespace swarmsynth
