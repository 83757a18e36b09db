#pragma once

#include <cstdint>
#include <vector>

#include "rde/env.hpp"

namespace rde {

// Exact enumeration of an environment's dynamics. Terminal states self-loop
// with zero reward. Each transition row sums to 1.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition_table;  // [s * A * S + a * S + s']
    std::vector<double> reward_table;      // [s * A + a]
    std::vector<std::uint8_t> terminal;

    double p(int s, int a, int next) const {
        return transition_table[(static_cast<std::size_t>(s) * n_actions + a) * n_states + next];
    }
    double r(int s, int a) const { return reward_table[static_cast<std::size_t>(s) * n_actions + a]; }
    bool is_terminal(int s) const { return terminal[s] != 0; }
};

// Enumerates a Chain or fixed-goal grid environment. Time-shaped goal
// rewards are tabulated at their step-0 value. Rejects specs whose goal is
// re-randomized every episode (no stationary MDP exists for those).
TabularMdp to_tabular(const EnvSpec& spec);

// Q-value table [s * A + a] with sup-norm Bellman residual below tol.
std::vector<double> value_iteration(const TabularMdp& mdp, double discount, double tol);

}  // namespace rde
