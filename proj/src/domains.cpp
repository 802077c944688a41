#include "safepomcp/domains.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace safepomcp {

const char* to_string(Family f) {
    switch (f) {
        case Family::Obstacle: return "obstacle";
        case Family::Refuel: return "refuel";
        case Family::Rocksample: return "rocksample";
    }
    return "?";
}

namespace {

enum Direction { East = 0, South = 1, West = 2, North = 3 };
constexpr const char* kMoveNames[] = {"east", "south", "west", "north"};
constexpr int kDr[] = {0, 1, 0, -1};
constexpr int kDc[] = {1, 0, -1, 0};

constexpr double kGoalReward = 1000.0;
constexpr double kStepCost = 1.0;
constexpr double kCollisionCost = 5.0;
constexpr double kGoodRockReward = 10.0;
constexpr double kBadRockReward = -10.0;

class Grid {
public:
    explicit Grid(const GridSpec& spec) : spec_(spec), n_(spec.size) {
        for (const auto& [a, b] : spec.doors) {
            doors_.insert({a, b});
            doors_.insert({b, a});
        }
    }

    int n() const { return n_; }
    int cells() const { return n_ * n_; }
    int index(Cell c) const { return (c.row - 1) * n_ + (c.col - 1); }
    Cell cell(int i) const { return {i / n_ + 1, i % n_ + 1}; }
    bool inside(Cell c) const { return c.row >= 1 && c.row <= n_ && c.col >= 1 && c.col <= n_; }

    bool passable(Cell from, Cell to) const {
        if (!inside(to)) return false;
        if (spec_.room(from) == spec_.room(to)) return true;
        return doors_.count({from, to}) > 0;
    }

    /// Target with probability 1-slip, one further cell with probability slip;
    /// walls truncate the overshoot and block the move entirely.
    std::vector<std::pair<Cell, double>> move(Cell from, int dir) const {
        const Cell target{from.row + kDr[dir], from.col + kDc[dir]};
        if (!passable(from, target)) return {{from, 1.0}};
        const Cell over{target.row + kDr[dir], target.col + kDc[dir]};
        if (spec_.slip <= 0.0 || !passable(target, over)) return {{target, 1.0}};
        return {{target, 1.0 - spec_.slip}, {over, spec_.slip}};
    }

    std::vector<Cell> neighbors(Cell c) const {
        std::vector<Cell> out;
        for (int d : {North, West, East, South}) {
            const Cell x{c.row + kDr[d], c.col + kDc[d]};
            if (inside(x)) out.push_back(x);
        }
        return out;
    }

    /// Noisy position sensor: true cell w.p. 1-eta, else a uniform grid neighbor.
    std::vector<std::pair<int, double>> cell_observation(Cell c) const {
        const auto nb = neighbors(c);
        std::vector<std::pair<int, double>> out{{index(c), 1.0 - spec_.sensor_noise}};
        if (spec_.sensor_noise > 0.0)
            for (const auto& x : nb) out.emplace_back(index(x), spec_.sensor_noise / static_cast<double>(nb.size()));
        std::sort(out.begin(), out.end());
        return out;
    }

    bool is_goal(Cell c) const { return std::find(spec_.goals.begin(), spec_.goals.end(), c) != spec_.goals.end(); }
    bool is_obstacle(Cell c) const {
        return std::find(spec_.obstacles.begin(), spec_.obstacles.end(), c) != spec_.obstacles.end();
    }
    bool is_station(Cell c) const {
        return std::find(spec_.stations.begin(), spec_.stations.end(), c) != spec_.stations.end();
    }

    std::string name(Cell c) const { return cell_name(spec_, c); }
    const std::string& room_name(Cell c) const { return spec_.room_names.at(static_cast<std::size_t>(spec_.room(c))); }

private:
    const GridSpec& spec_;
    int n_;
    std::set<std::pair<Cell, Cell>> doors_;
};

bool adjacent(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

std::vector<Cell> reserved_cells(const GridSpec& spec) {
    std::vector<Cell> out{spec.start};
    out.insert(out.end(), spec.goals.begin(), spec.goals.end());
    for (const auto& [a, b] : spec.doors) {
        // Door cells and the cells an overshoot through the door lands on.
        out.push_back(a);
        out.push_back(b);
        out.push_back({2 * a.row - b.row, 2 * a.col - b.col});
        out.push_back({2 * b.row - a.row, 2 * b.col - a.col});
    }
    return out;
}

std::vector<Cell> place_cells(const GridSpec& spec, std::size_t count, std::vector<Cell> taken, Rng& rng) {
    std::vector<Cell> free;
    for (int r = 1; r <= spec.size; ++r)
        for (int c = 1; c <= spec.size; ++c)
            if (std::find(taken.begin(), taken.end(), Cell{r, c}) == taken.end()) free.push_back({r, c});
    std::vector<Cell> out;
    while (out.size() < count && !free.empty()) {
        const auto i = uniform_index(rng, free.size());
        out.push_back(free[i]);
        free.erase(free.begin() + static_cast<std::ptrdiff_t>(i));
    }
    std::sort(out.begin(), out.end());
    return out;
}

void add_cell_observation_names(PomdpBuilder& b, const Grid& g) {
    for (int i = 0; i < g.cells(); ++i) b.observation_name(static_cast<ObservationId>(i), g.name(g.cell(i)));
}

}  // namespace

std::string cell_name(const GridSpec& spec, Cell c) {
    if (spec.size <= 9) return "g" + std::to_string(c.row) + std::to_string(c.col);
    return "g" + std::to_string(c.row) + "_" + std::to_string(c.col);
}

void GridSpec::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid grid spec: " + what); };
    if (size < 1 || size > 64) fail("size must be in [1, 64]");
    if (!(slip >= 0.0 && slip < 1.0)) fail("slip must be in [0, 1)");
    if (!(sensor_noise >= 0.0 && sensor_noise < 1.0)) fail("sensor_noise must be in [0, 1)");
    const Grid g(*this);
    auto check_cell = [&](Cell c, const char* what) {
        if (!g.inside(c)) fail(std::string(what) + " outside the grid");
    };
    check_cell(start, "start");
    if (goals.empty()) fail("at least one goal cell is required");
    for (auto c : goals) check_cell(c, "goal");
    for (auto c : obstacles) check_cell(c, "obstacle");
    if (g.is_obstacle(start)) fail("start is an obstacle");
    for (auto c : goals)
        if (g.is_obstacle(c)) fail("goal " + cell_name(*this, c) + " is an obstacle");
    if (g.is_goal(start)) {
        // allowed: degenerate world that starts at the goal
    }
    if (room_of.size() != static_cast<std::size_t>(size * size)) fail("room_of must label every cell");
    for (int r : room_of)
        if (r < 0 || static_cast<std::size_t>(r) >= room_names.size()) fail("room index without a name");
    for (const auto& [a, b] : doors) {
        check_cell(a, "door");
        check_cell(b, "door");
        if (!adjacent(a, b)) fail("door cells must be adjacent");
        if (room(a) == room(b)) fail("door must connect two different rooms");
    }
    if (family == Family::Refuel) {
        if (battery < 1) fail("battery capacity must be at least 1");
        for (auto c : stations) check_cell(c, "station");
    }
    if (family == Family::Rocksample) {
        if (rocks.empty()) fail("rocksample needs at least one rock");
        if (rocks.size() > 8) fail("at most 8 rocks are supported");
        for (auto c : rocks) check_cell(c, "rock");
        if (!(half_distance > 0.0)) fail("half_distance must be positive");
    }
}

void set_four_rooms(GridSpec& spec) {
    const int n = spec.size;
    const int h = std::max(1, n / 2);
    spec.room_names = {"I", "II", "III", "IV"};
    spec.room_of.assign(static_cast<std::size_t>(n * n), 0);
    for (int r = 1; r <= n; ++r)
        for (int c = 1; c <= n; ++c)
            spec.room_of[static_cast<std::size_t>((r - 1) * n + (c - 1))] = (r > h ? 2 : 0) + (c > h ? 1 : 0);
    spec.doors = {{{1, h}, {1, h + 1}},
                  {{h, 1}, {h + 1, 1}},
                  {{h, n}, {h + 1, n}},
                  {{n - 1, h}, {n - 1, h + 1}}};
}

GridSpec obstacle_spec(int n, std::uint64_t seed) {
    GridSpec s;
    s.family = Family::Obstacle;
    s.size = n;
    s.seed = seed;
    s.goals = {{n, n}};
    set_four_rooms(s);
    Rng rng(seed);
    const auto count = static_cast<std::size_t>(std::lround(n * n / 9.0));
    s.obstacles = place_cells(s, count, reserved_cells(s), rng);
    return s;
}

GridSpec fig1_spec() {
    GridSpec s;
    s.size = 6;
    s.goals = {{6, 6}};
    set_four_rooms(s);
    s.obstacles = {{1, 5}, {2, 1}, {3, 4}, {6, 2}};
    return s;
}

GridSpec fig2_spec() {
    GridSpec s = fig1_spec();
    s.obstacles = {{1, 6}, {2, 4}};
    // No door between rooms I and III: room I only exits east along row 1.
    s.doors = {{{1, 3}, {1, 4}}, {{3, 6}, {4, 6}}, {{5, 3}, {5, 4}}};
    return s;
}

GridSpec tiny_spec() {
    GridSpec s;
    s.size = 3;
    s.goals = {{3, 3}};
    s.obstacles = {{2, 2}};
    s.room_names = {"L", "R"};
    s.room_of = {0, 0, 1, 0, 0, 1, 0, 0, 1};
    s.doors = {{{1, 2}, {1, 3}}, {{3, 2}, {3, 3}}};
    return s;
}

GridSpec refuel_spec(int n, int battery, std::uint64_t seed) {
    GridSpec s;
    s.family = Family::Refuel;
    s.size = n;
    s.battery = battery;
    s.seed = seed;
    s.goals = {{n, n}};
    set_four_rooms(s);
    // One station on the near side of every door.
    for (const auto& [a, b] : s.doors) s.stations.push_back(a);
    s.stations.push_back(s.start);
    std::sort(s.stations.begin(), s.stations.end());
    s.stations.erase(std::unique(s.stations.begin(), s.stations.end()), s.stations.end());
    Rng rng(seed);
    auto taken = reserved_cells(s);
    taken.insert(taken.end(), s.stations.begin(), s.stations.end());
    s.obstacles = place_cells(s, static_cast<std::size_t>(std::lround(n * n / 12.0)), taken, rng);
    return s;
}

GridSpec rocksample_spec(int n, int rocks, std::uint64_t seed) {
    GridSpec s;
    s.family = Family::Rocksample;
    s.size = n;
    s.seed = seed;
    s.goals = {{n, n}};
    set_four_rooms(s);
    Rng rng(seed);
    s.rocks = place_cells(s, static_cast<std::size_t>(rocks), reserved_cells(s), rng);
    return s;
}

// ---------------------------------------------------------------------------
// Obstacle

Pomdp gen_obstacle(const GridSpec& spec) {
    spec.validate();
    const Grid g(spec);
    const int C = g.cells();
    const StateId sink = static_cast<StateId>(C);
    PomdpBuilder b(static_cast<std::size_t>(C) + 1, 4, static_cast<std::size_t>(C) + 1);
    for (int i = 0; i < C; ++i) b.state_name(static_cast<StateId>(i), g.name(g.cell(i)));
    b.state_name(sink, "done");
    for (int d = 0; d < 4; ++d) b.action_name(static_cast<ActionId>(d), kMoveNames[d]);
    add_cell_observation_names(b, g);
    b.observation_name(static_cast<ObservationId>(C), "done");

    for (int i = 0; i < C; ++i) {
        const Cell c = g.cell(i);
        const auto s = static_cast<StateId>(i);
        for (ActionId a = 0; a < 4; ++a) {
            for (auto [o, p] : g.cell_observation(c)) b.observation(s, a, static_cast<ObservationId>(o), p);
            if (g.is_goal(c)) {
                b.transition(s, a, s, 1.0);
                continue;
            }
            double reward = -kStepCost;
            for (auto [next, p] : g.move(c, static_cast<int>(a))) {
                b.transition(s, a, static_cast<StateId>(g.index(next)), p);
                if (g.is_goal(next)) reward += p * kGoalReward;
                if (g.is_obstacle(next)) reward -= p * kCollisionCost;
            }
            b.reward(s, a, reward);
        }
        if (g.is_goal(c)) b.reach(s);
        if (g.is_obstacle(c)) b.avoid(s);
        b.region(s, g.room_name(c));
    }
    for (ActionId a = 0; a < 4; ++a) {
        b.transition(sink, a, sink, 1.0);
        b.observation(sink, a, static_cast<ObservationId>(C), 1.0);
    }
    b.region(sink, g.room_name(spec.goals.front()));
    b.initial(static_cast<StateId>(g.index(spec.start)), 1.0);
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Refuel

Pomdp gen_refuel(const GridSpec& spec) {
    spec.validate();
    if (spec.family != Family::Refuel) throw std::invalid_argument("gen_refuel needs a refuel grid spec");
    const Grid g(spec);
    const int C = g.cells();
    const int E = spec.battery;
    const int levels = E + 1;
    const int low_threshold = std::max(1, E / 4);
    auto id = [&](int cell, int level) { return static_cast<StateId>(cell * levels + level); };
    const StateId sink = static_cast<StateId>(C * levels);
    const ActionId refuel = 4;
    auto obs = [&](int cell, int low) { return static_cast<ObservationId>(cell * 2 + low); };
    const ObservationId done = static_cast<ObservationId>(2 * C);

    PomdpBuilder b(static_cast<std::size_t>(C * levels) + 1, 5, static_cast<std::size_t>(2 * C) + 1);
    for (int i = 0; i < C; ++i)
        for (int e = 0; e < levels; ++e) b.state_name(id(i, e), g.name(g.cell(i)) + "_e" + std::to_string(e));
    b.state_name(sink, "done");
    for (int d = 0; d < 4; ++d) b.action_name(static_cast<ActionId>(d), kMoveNames[d]);
    b.action_name(refuel, "refuel");
    for (int i = 0; i < C; ++i) {
        b.observation_name(obs(i, 0), g.name(g.cell(i)) + "_ok");
        b.observation_name(obs(i, 1), g.name(g.cell(i)) + "_low");
    }
    b.observation_name(done, "done");

    auto is_avoid = [&](Cell c, int level) {
        if (g.is_goal(c)) return false;
        return g.is_obstacle(c) || (level == 0 && !g.is_station(c));
    };

    for (int i = 0; i < C; ++i) {
        const Cell c = g.cell(i);
        for (int e = 0; e < levels; ++e) {
            const StateId s = id(i, e);
            const bool low = e <= low_threshold;
            for (ActionId a = 0; a < 5; ++a) {
                for (auto [o, p] : g.cell_observation(c)) {
                    b.observation(s, a, obs(o, low ? 1 : 0), p * (1.0 - spec.sensor_noise));
                    b.observation(s, a, obs(o, low ? 0 : 1), p * spec.sensor_noise);
                }
                if (g.is_goal(c)) {
                    b.transition(s, a, s, 1.0);
                    continue;
                }
                std::vector<std::pair<StateId, double>> next;
                if (a == refuel) {
                    next.emplace_back(g.is_station(c) ? id(i, E) : s, 1.0);
                } else if (e == 0) {
                    next.emplace_back(s, 1.0);
                } else {
                    for (auto [to, p] : g.move(c, static_cast<int>(a))) next.emplace_back(id(g.index(to), e - 1), p);
                }
                double reward = -kStepCost;
                for (auto [to, p] : next) {
                    b.transition(s, a, to, p);
                    const Cell tc = g.cell(static_cast<int>(to) / levels);
                    if (to != s && g.is_goal(tc)) reward += p * kGoalReward;
                    if (to != s && is_avoid(tc, static_cast<int>(to) % levels)) reward -= p * kCollisionCost;
                }
                b.reward(s, a, reward);
            }
            if (g.is_goal(c)) b.reach(s);
            if (is_avoid(c, e)) b.avoid(s);
            b.region(s, g.room_name(c));
        }
    }
    for (ActionId a = 0; a < 5; ++a) {
        b.transition(sink, a, sink, 1.0);
        b.observation(sink, a, done, 1.0);
    }
    b.region(sink, g.room_name(spec.goals.front()));
    b.initial(id(g.index(spec.start), E), 1.0);
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Rocksample

Pomdp gen_rocksample(const GridSpec& spec) {
    spec.validate();
    if (spec.family != Family::Rocksample) throw std::invalid_argument("gen_rocksample needs a rocksample grid spec");
    const Grid g(spec);
    const int C = g.cells();
    const int R = static_cast<int>(spec.rocks.size());
    int combos = 1;
    for (int k = 0; k < R; ++k) combos *= 3;
    enum Status { Good = 0, Bad = 1, Collected = 2 };
    auto digit = [](int code, int k) {
        for (int i = 0; i < k; ++i) code /= 3;
        return code % 3;
    };
    auto with_digit = [&](int code, int k, int value) {
        int scale = 1;
        for (int i = 0; i < k; ++i) scale *= 3;
        return code + (value - digit(code, k)) * scale;
    };
    auto id = [&](int cell, int code) { return static_cast<StateId>(cell * combos + code); };
    const StateId hazard = static_cast<StateId>(C * combos);
    const ActionId sample = 4;
    const auto A = static_cast<std::size_t>(5 + R);
    const auto obs_good = static_cast<ObservationId>(C), obs_bad = obs_good + 1, obs_empty = obs_good + 2,
               obs_hazard = obs_good + 3;

    PomdpBuilder b(static_cast<std::size_t>(C * combos) + 1, A, static_cast<std::size_t>(C) + 4);
    for (int i = 0; i < C; ++i)
        for (int code = 0; code < combos; ++code) {
            std::string tag;
            for (int k = 0; k < R; ++k) tag += "gbx"[digit(code, k)];
            b.state_name(id(i, code), g.name(g.cell(i)) + "_" + tag);
        }
    b.state_name(hazard, "hazard");
    for (int d = 0; d < 4; ++d) b.action_name(static_cast<ActionId>(d), kMoveNames[d]);
    b.action_name(sample, "sample");
    for (int k = 0; k < R; ++k) b.action_name(static_cast<ActionId>(5 + k), "sense" + std::to_string(k));
    add_cell_observation_names(b, g);
    b.observation_name(obs_good, "good");
    b.observation_name(obs_bad, "bad");
    b.observation_name(obs_empty, "empty");
    b.observation_name(obs_hazard, "hazard");

    auto rock_in_reach = [&](Cell c, int code) -> int {
        for (int k = 0; k < R; ++k) {
            const Cell rc = spec.rocks[static_cast<std::size_t>(k)];
            if ((rc == c || adjacent(rc, c)) && digit(code, k) != Collected) return k;
        }
        return -1;
    };

    for (int i = 0; i < C; ++i) {
        const Cell c = g.cell(i);
        for (int code = 0; code < combos; ++code) {
            const StateId s = id(i, code);
            for (ActionId a = 0; a < A; ++a) {
                if (a < 5) {
                    for (auto [o, p] : g.cell_observation(c)) b.observation(s, a, static_cast<ObservationId>(o), p);
                } else {
                    const int k = static_cast<int>(a) - 5;
                    const Cell rc = spec.rocks[static_cast<std::size_t>(k)];
                    const int status = digit(code, k);
                    if (status == Collected) {
                        b.observation(s, a, obs_empty, 1.0);
                    } else {
                        const double d = std::hypot(rc.row - c.row, rc.col - c.col);
                        const double accuracy = 0.5 + 0.5 * std::exp2(-d / spec.half_distance);
                        const auto truth = status == Good ? obs_good : obs_bad;
                        const auto lie = status == Good ? obs_bad : obs_good;
                        b.observation(s, a, truth, accuracy);
                        if (accuracy < 1.0) b.observation(s, a, lie, 1.0 - accuracy);
                    }
                }
                if (g.is_goal(c)) {
                    b.transition(s, a, s, 1.0);
                    continue;
                }
                if (a < 4) {
                    double reward = -kStepCost;
                    for (auto [to, p] : g.move(c, static_cast<int>(a))) {
                        b.transition(s, a, id(g.index(to), code), p);
                        if (g.is_goal(to)) reward += p * kGoalReward;
                    }
                    b.reward(s, a, reward);
                } else if (a == sample) {
                    const int k = rock_in_reach(c, code);
                    if (k < 0) {
                        b.transition(s, a, s, 1.0);
                        b.reward(s, a, -kStepCost);
                    } else if (digit(code, k) == Good) {
                        b.transition(s, a, id(i, with_digit(code, k, Collected)), 1.0);
                        b.reward(s, a, kGoodRockReward);
                    } else {
                        b.transition(s, a, hazard, 1.0);
                        b.reward(s, a, kBadRockReward);
                    }
                } else {
                    b.transition(s, a, s, 1.0);
                    b.reward(s, a, -kStepCost);
                }
            }
            if (g.is_goal(c)) b.reach(s);
            b.region(s, g.room_name(c));
        }
    }
    for (ActionId a = 0; a < A; ++a) {
        b.transition(hazard, a, hazard, 1.0);
        b.observation(hazard, a, obs_hazard, 1.0);
    }
    b.avoid(hazard);
    b.region(hazard, g.room_name(spec.goals.front()));

    // Every rock is good or bad with equal probability.
    const int start = g.index(spec.start);
    const double p = 1.0 / static_cast<double>(1 << R);
    for (int mask = 0; mask < (1 << R); ++mask) {
        int code = 0;
        for (int k = 0; k < R; ++k)
            if (mask & (1 << k)) code = with_digit(code, k, Bad);
        b.initial(id(start, code), p);
    }
    return std::move(b).build();
}

Pomdp generate(const GridSpec& spec) {
    switch (spec.family) {
        case Family::Obstacle: return gen_obstacle(spec);
        case Family::Refuel: return gen_refuel(spec);
        case Family::Rocksample: return gen_rocksample(spec);
    }
    throw std::invalid_argument("unknown family");
}

std::string grid_params(const GridSpec& spec) {
    switch (spec.family) {
        case Family::Obstacle: return std::to_string(spec.size);
        case Family::Refuel: return std::to_string(spec.size) + "," + std::to_string(spec.battery);
        case Family::Rocksample: return std::to_string(spec.size) + "," + std::to_string(spec.rocks.size());
    }
    return "";
}

std::string layout_preview(const GridSpec& spec) {
    const Grid g(spec);
    const int n = spec.size;
    auto glyph = [&](Cell c) {
        if (c == spec.start) return 'S';
        if (g.is_goal(c)) return 'G';
        if (g.is_obstacle(c)) return 'X';
        if (g.is_station(c)) return 'F';
        if (std::find(spec.rocks.begin(), spec.rocks.end(), c) != spec.rocks.end()) return 'r';
        return '.';
    };
    auto door = [&](Cell a, Cell b) {
        return std::any_of(spec.doors.begin(), spec.doors.end(), [&](const auto& d) {
            return (d.first == a && d.second == b) || (d.first == b && d.second == a);
        });
    };
    std::ostringstream os;
    for (int r = 1; r <= n; ++r) {
        for (int c = 1; c <= n; ++c) {
            os << ' ' << glyph({r, c}) << ' ';
            if (c < n) {
                const bool wall = spec.room({r, c}) != spec.room({r, c + 1});
                os << (wall ? (door({r, c}, {r, c + 1}) ? ':' : '|') : ' ');
            }
        }
        os << '\n';
        if (r < n) {
            for (int c = 1; c <= n; ++c) {
                const bool wall = spec.room({r, c}) != spec.room({r + 1, c});
                const char ch = wall ? (door({r, c}, {r + 1, c}) ? '.' : '-') : ' ';
                os << std::string(3, ch);
                if (c < n) os << ' ';
            }
            os << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

using nlohmann::json;

Cell cell_from_json(const json& j) {
    if (j.is_string()) {
        // "g15" style (single-digit row and column) or "g10_12".
        const std::string s = j.get<std::string>();
        if (s.size() >= 3 && s[0] == 'g') {
            const auto us = s.find('_');
            if (us != std::string::npos) return {std::stoi(s.substr(1, us - 1)), std::stoi(s.substr(us + 1))};
            if (s.size() == 3) return {s[1] - '0', s[2] - '0'};
        }
        throw std::invalid_argument("cannot parse cell '" + s + "'");
    }
    if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
    throw std::invalid_argument("cells are [row, col] pairs or g<row><col> names");
}

std::vector<Cell> cells_from_json(const json& j) {
    std::vector<Cell> out;
    for (const auto& x : j) out.push_back(cell_from_json(x));
    return out;
}

json cells_to_json(const std::vector<Cell>& cells) {
    json out = json::array();
    for (auto c : cells) out.push_back({c.row, c.col});
    return out;
}

}  // namespace

GridSpec grid_spec_from_json(const std::string& text) {
    const json j = json::parse(text);
    static const std::set<std::string> known{"preset", "family", "size", "seed", "start", "goals", "obstacles",
                                             "slip", "sensor_noise", "battery", "stations", "rocks",
                                             "rock_count", "half_distance", "doors"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw std::invalid_argument("unknown grid spec key: " + it.key());

    GridSpec s;
    if (j.contains("preset")) {
        const auto p = j["preset"].get<std::string>();
        if (p == "fig1") s = fig1_spec();
        else if (p == "fig2") s = fig2_spec();
        else if (p == "tiny") s = tiny_spec();
        else throw std::invalid_argument("unknown preset: " + p);
    } else {
        const auto family = j.value("family", std::string("obstacle"));
        const int n = j.value("size", 6);
        const auto seed = j.value("seed", std::uint64_t{1});
        if (family == "obstacle") s = obstacle_spec(n, seed);
        else if (family == "refuel") s = refuel_spec(n, j.value("battery", 8), seed);
        else if (family == "rocksample") s = rocksample_spec(n, j.value("rock_count", 3), seed);
        else throw std::invalid_argument("unknown family: " + family);
    }
    if (j.contains("start")) s.start = cell_from_json(j["start"]);
    if (j.contains("goals")) s.goals = cells_from_json(j["goals"]);
    if (j.contains("obstacles")) s.obstacles = cells_from_json(j["obstacles"]);
    if (j.contains("slip")) s.slip = j["slip"].get<double>();
    if (j.contains("sensor_noise")) s.sensor_noise = j["sensor_noise"].get<double>();
    if (j.contains("stations")) s.stations = cells_from_json(j["stations"]);
    if (j.contains("rocks")) s.rocks = cells_from_json(j["rocks"]);
    if (j.contains("half_distance")) s.half_distance = j["half_distance"].get<double>();
    if (j.contains("doors")) {
        s.doors.clear();
        for (const auto& d : j["doors"]) s.doors.emplace_back(cell_from_json(d[0]), cell_from_json(d[1]));
    }
    s.validate();
    return s;
}

std::string grid_spec_to_json(const GridSpec& s) {
    json j;
    j["family"] = to_string(s.family);
    j["size"] = s.size;
    j["seed"] = s.seed;
    j["start"] = {s.start.row, s.start.col};
    j["goals"] = cells_to_json(s.goals);
    j["obstacles"] = cells_to_json(s.obstacles);
    j["slip"] = s.slip;
    j["sensor_noise"] = s.sensor_noise;
    json doors = json::array();
    for (const auto& [a, b] : s.doors) doors.push_back({{a.row, a.col}, {b.row, b.col}});
    j["doors"] = doors;
    if (s.family == Family::Refuel) {
        j["battery"] = s.battery;
        j["stations"] = cells_to_json(s.stations);
    }
    if (s.family == Family::Rocksample) {
        j["rocks"] = cells_to_json(s.rocks);
        j["half_distance"] = s.half_distance;
    }
    return j.dump(2);
}

}  // namespace safepomcp
