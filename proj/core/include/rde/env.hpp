#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rde/rng.hpp"

namespace rde {

enum class EnvKind { Chain, FourRooms, HazardGrid };

// Declarative environment description. Layouts are a pure function of the
// spec (structural walls plus layout_seed for fixed goal placement).
struct EnvSpec {
    EnvKind kind = EnvKind::Chain;
    int chain_length = 5;
    int grid_size = 7;  // side length including the outer wall ring
    int max_steps = 100;
    double discount = 0.99;
    std::uint64_t layout_seed = 0;
    bool randomize_goal = true;  // FourRooms: new goal every episode
    std::string ascii_map;       // optional explicit layout, overrides grid_size
};

// One-hot feature vector: position (+ goal for grids).
using Observation = std::vector<double>;

struct StepResult {
    Observation next_obs;
    double reward = 0.0;
    double cost = 0.0;
    bool done = false;
    bool truncated = false;
};

// Rectangular cell map. Legend: '#' wall, '.' floor, 'G' goal, 'H' hazard,
// 'S' start. Goal/hazard/start cells count as floor for movement.
struct GridLayout {
    int width = 0;
    int height = 0;
    std::vector<char> cells;

    char at(int r, int c) const { return cells[static_cast<std::size_t>(r) * width + c]; }
    bool is_wall(int r, int c) const { return at(r, c) == '#'; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }

    static GridLayout parse(const std::string& ascii);
    std::string to_ascii() const;
};

// Built-in layouts. four_rooms_layout has no G/S markers (placement is
// drawn at reset); hazard_grid_layout carries fixed S, G and an H band
// crossed by the short path.
GridLayout four_rooms_layout(int size);
GridLayout hazard_grid_layout(int size);

// Goal reward at step index t (0-based count of steps taken before the
// reaching move): 10 * (1 - 0.9 * t / max_steps).
double four_rooms_goal_reward(long steps_before, int max_steps);

// Single-owner mutable environment instance.
class Environment {
public:
    explicit Environment(EnvSpec spec);

    Observation reset(Rng& rng);
    StepResult step(int action, Rng& rng);

    int observation_dim() const;
    int action_count() const;
    const EnvSpec& spec() const { return spec_; }

    const GridLayout& layout() const { return layout_; }
    const std::vector<int>& floor_cells() const { return floor_cells_; }
    int agent_cell() const { return agent_cell_; }
    int goal_cell() const { return goal_cell_; }
    // True when the goal never moves between episodes (G marker, fixed-goal
    // draw from layout_seed, or chain terminal).
    bool goal_fixed() const { return spec_.kind == EnvKind::Chain || fixed_goal_cell_ >= 0; }
    long steps_elapsed() const { return steps_elapsed_; }

private:
    Observation observe() const;
    int move_from(int cell, int action) const;

    EnvSpec spec_;
    GridLayout layout_;                // grids only
    std::vector<int> floor_cells_;     // cell index -> flat grid index
    std::vector<int> floor_index_of_;  // flat grid index -> floor index or -1
    int agent_cell_ = 0;               // floor index (grids) or chain state
    int goal_cell_ = -1;               // floor index; -1 before first reset
    int fixed_goal_cell_ = -1;
    int start_cell_ = -1;
    long steps_elapsed_ = 0;
    bool episode_over_ = true;
};

}  // namespace rde
