#include "rde/env.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace rde {

namespace {

constexpr std::uint64_t kGoalPlacementStream = 7;

// N/E/S/W row and column deltas.
constexpr int kRowDelta[4] = {-1, 0, 1, 0};
constexpr int kColDelta[4] = {0, 1, 0, -1};

}  // namespace

GridLayout GridLayout::parse(const std::string& ascii) {
    GridLayout layout;
    std::istringstream in(ascii);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (layout.width == 0) {
            layout.width = static_cast<int>(line.size());
        } else if (static_cast<int>(line.size()) != layout.width) {
            throw std::invalid_argument("GridLayout::parse: ragged rows");
        }
        for (char ch : line) {
            if (ch != '#' && ch != '.' && ch != 'G' && ch != 'H' && ch != 'S')
                throw std::invalid_argument(std::string("GridLayout::parse: bad cell '") + ch + "'");
            layout.cells.push_back(ch);
        }
        layout.height += 1;
    }
    if (layout.width < 3 || layout.height < 3)
        throw std::invalid_argument("GridLayout::parse: map too small");
    return layout;
}

std::string GridLayout::to_ascii() const {
    std::string out;
    out.reserve(static_cast<std::size_t>(height) * (width + 1));
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) out.push_back(at(r, c));
        out.push_back('\n');
    }
    return out;
}

GridLayout four_rooms_layout(int size) {
    if (size < 5) throw std::invalid_argument("four_rooms_layout: size must be at least 5");
    const int mid = size / 2;
    const int near_door = (1 + (mid - 1)) / 2;
    const int far_door = ((mid + 1) + (size - 2)) / 2;
    GridLayout layout;
    layout.width = size;
    layout.height = size;
    layout.cells.resize(static_cast<std::size_t>(size) * size, '.');
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            bool wall = r == 0 || r == size - 1 || c == 0 || c == size - 1;
            if (r == mid && c != near_door && c != far_door) wall = true;
            if (c == mid && r != near_door && r != far_door) wall = true;
            if (wall) layout.cells[static_cast<std::size_t>(r) * size + c] = '#';
        }
    }
    return layout;
}

GridLayout hazard_grid_layout(int size) {
    if (size < 5) throw std::invalid_argument("hazard_grid_layout: size must be at least 5");
    const int mid = size / 2;
    GridLayout layout;
    layout.width = size;
    layout.height = size;
    layout.cells.resize(static_cast<std::size_t>(size) * size, '.');
    auto set = [&](int r, int c, char ch) { layout.cells[static_cast<std::size_t>(r) * size + c] = ch; };
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            if (r == 0 || r == size - 1 || c == 0 || c == size - 1) set(r, c, '#');
        }
    }
    // Hazard band across the middle with a cost-free gap on the far side.
    for (int c = 1; c < size - 2; ++c) set(mid, c, 'H');
    set(1, 1, 'S');
    set(size - 2, 1, 'G');
    return layout;
}

double four_rooms_goal_reward(long steps_before, int max_steps) {
    return 10.0 * (1.0 - 0.9 * static_cast<double>(steps_before) / max_steps);
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
    if (spec_.max_steps < 1) throw std::invalid_argument("Environment: max_steps must be >= 1");
    if (!(spec_.discount >= 0.0 && spec_.discount < 1.0))
        throw std::invalid_argument("Environment: discount must lie in [0, 1)");

    if (spec_.kind == EnvKind::Chain) {
        if (spec_.chain_length < 2) throw std::invalid_argument("Environment: chain_length must be >= 2");
        return;
    }

    if (!spec_.ascii_map.empty()) {
        layout_ = GridLayout::parse(spec_.ascii_map);
    } else if (spec_.kind == EnvKind::FourRooms) {
        layout_ = four_rooms_layout(spec_.grid_size);
    } else {
        layout_ = hazard_grid_layout(spec_.grid_size);
    }

    floor_index_of_.assign(static_cast<std::size_t>(layout_.width) * layout_.height, -1);
    for (int r = 0; r < layout_.height; ++r) {
        for (int c = 0; c < layout_.width; ++c) {
            const int flat = r * layout_.width + c;
            const char ch = layout_.cells[flat];
            if (ch == '#') continue;
            floor_index_of_[flat] = static_cast<int>(floor_cells_.size());
            floor_cells_.push_back(flat);
            if (ch == 'G') fixed_goal_cell_ = floor_index_of_[flat];
            if (ch == 'S') start_cell_ = floor_index_of_[flat];
        }
    }
    if (floor_cells_.size() < 2) throw std::invalid_argument("Environment: layout needs at least two floor cells");

    if (fixed_goal_cell_ < 0 && !spec_.randomize_goal) {
        Rng layout_rng(spec_.layout_seed, kGoalPlacementStream);
        fixed_goal_cell_ = static_cast<int>(layout_rng.uniform_int(static_cast<std::uint32_t>(floor_cells_.size())));
    }
}

int Environment::observation_dim() const {
    if (spec_.kind == EnvKind::Chain) return spec_.chain_length;
    return 2 * static_cast<int>(floor_cells_.size());
}

int Environment::action_count() const { return spec_.kind == EnvKind::Chain ? 2 : 4; }

Observation Environment::observe() const {
    Observation obs(observation_dim(), 0.0);
    if (spec_.kind == EnvKind::Chain) {
        obs[agent_cell_] = 1.0;
        return obs;
    }
    obs[agent_cell_] = 1.0;
    obs[floor_cells_.size() + goal_cell_] = 1.0;
    return obs;
}

Observation Environment::reset(Rng& rng) {
    steps_elapsed_ = 0;
    episode_over_ = false;
    if (spec_.kind == EnvKind::Chain) {
        agent_cell_ = 0;
        return observe();
    }

    const auto n_floor = static_cast<std::uint32_t>(floor_cells_.size());
    if (fixed_goal_cell_ >= 0) {
        goal_cell_ = fixed_goal_cell_;
    } else {
        goal_cell_ = static_cast<int>(rng.uniform_int(n_floor));
    }
    if (start_cell_ >= 0) {
        agent_cell_ = start_cell_;
    } else {
        // Place on any floor cell other than the goal.
        int idx = static_cast<int>(rng.uniform_int(n_floor - 1));
        if (idx >= goal_cell_) idx += 1;
        agent_cell_ = idx;
    }
    return observe();
}

int Environment::move_from(int cell, int action) const {
    const int flat = floor_cells_[cell];
    const int r = flat / layout_.width;
    const int c = flat % layout_.width;
    const int nr = r + kRowDelta[action];
    const int nc = c + kColDelta[action];
    if (!layout_.in_bounds(nr, nc) || layout_.is_wall(nr, nc)) return cell;
    return floor_index_of_[nr * layout_.width + nc];
}

StepResult Environment::step(int action, Rng& /*rng*/) {
    if (episode_over_) throw std::logic_error("Environment::step: episode already over, call reset");
    if (action < 0 || action >= action_count())
        throw std::invalid_argument("Environment::step: invalid action index");

    const long t_before = steps_elapsed_;
    StepResult result;

    if (spec_.kind == EnvKind::Chain) {
        agent_cell_ = action == 1 ? agent_cell_ + 1 : std::max(0, agent_cell_ - 1);
        if (agent_cell_ == spec_.chain_length - 1) {
            result.reward = 1.0;
            result.done = true;
        }
    } else {
        agent_cell_ = move_from(agent_cell_, action);
        const char ch = layout_.cells[floor_cells_[agent_cell_]];
        if (spec_.kind == EnvKind::HazardGrid && ch == 'H') result.cost = 1.0;
        if (agent_cell_ == goal_cell_) {
            result.done = true;
            result.reward = spec_.kind == EnvKind::FourRooms
                                ? four_rooms_goal_reward(t_before, spec_.max_steps)
                                : 1.0;
        }
    }

    steps_elapsed_ += 1;
    result.truncated = steps_elapsed_ >= spec_.max_steps;
    episode_over_ = result.done || result.truncated;
    result.next_obs = observe();
    return result;
}

}  // namespace rde
