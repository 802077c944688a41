#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "safepomcp/model.hpp"

namespace safepomcp {

/// Grid cell, 1-based (row, column) as in the g<row><col> naming.
struct Cell {
    int row = 1;
    int col = 1;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Family { Obstacle, Refuel, Rocksample };

const char* to_string(Family f);

/// Parameters shared by the three grid benchmark families. Cells left empty
/// are placed by the seeded layout helpers below.
struct GridSpec {
    Family family = Family::Obstacle;
    int size = 6;
    Cell start{1, 1};
    std::vector<Cell> goals;
    std::vector<Cell> obstacles;
    double slip = 0.2;
    double sensor_noise = 0.1;

    /// Room index per cell in row-major order, with display labels. Moves
    /// between cells of different rooms are blocked unless the pair is a door.
    std::vector<int> room_of;
    std::vector<std::string> room_names;
    std::vector<std::pair<Cell, Cell>> doors;

    // Refuel
    int battery = 0;
    std::vector<Cell> stations;

    // Rocksample
    std::vector<Cell> rocks;
    double half_distance = 2.0;

    std::uint64_t seed = 0;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    int room(Cell c) const { return room_of[static_cast<std::size_t>((c.row - 1) * size + (c.col - 1))]; }
};

/// Four quadrant rooms I..IV joined by one door per shared wall, as in the
/// motivating 6x6 world.
void set_four_rooms(GridSpec& spec);

/// Layouts used by tests and benchmarks.
GridSpec obstacle_spec(int n, std::uint64_t seed = 1);
GridSpec refuel_spec(int n, int battery, std::uint64_t seed = 1);
GridSpec rocksample_spec(int n, int rocks, std::uint64_t seed = 1);
/// The four-room 6x6 world with obstacles g15, g21, g34, g62.
GridSpec fig1_spec();
/// Variant where centralized and factored regions differ (obstacles g16, g24).
GridSpec fig2_spec();
/// 3x3 world with one obstacle and two rooms (10 states with the sink).
GridSpec tiny_spec();

Pomdp gen_obstacle(const GridSpec& spec);
Pomdp gen_refuel(const GridSpec& spec);
Pomdp gen_rocksample(const GridSpec& spec);
Pomdp generate(const GridSpec& spec);

std::string cell_name(const GridSpec& spec, Cell c);
/// Plain-text grid art: S start, G goal, X obstacle, F station, r rock,
/// `|`/`-` walls, `:`/`.` doors.
std::string layout_preview(const GridSpec& spec);

/// Key-value document (JSON) describing a GridSpec; unknown keys are rejected.
GridSpec grid_spec_from_json(const std::string& text);
std::string grid_spec_to_json(const GridSpec& spec);
/// Short parameter string for reports, e.g. "6" or "6,8".
std::string grid_params(const GridSpec& spec);

}  // namespace safepomcp
