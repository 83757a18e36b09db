#include "rde/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rde {

TabularMdp to_tabular(const EnvSpec& spec) {
    Environment env(spec);
    TabularMdp mdp;
    mdp.n_actions = env.action_count();

    auto idx_p = [&](int s, int a, int next) {
        return (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states + next;
    };

    if (spec.kind == EnvKind::Chain) {
        mdp.n_states = spec.chain_length;
        mdp.transition_table.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states, 0.0);
        mdp.reward_table.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
        mdp.terminal.assign(mdp.n_states, 0);
        const int terminal_state = spec.chain_length - 1;
        mdp.terminal[terminal_state] = 1;
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < 2; ++a) {
                int next = s;
                if (!mdp.is_terminal(s)) next = a == 1 ? s + 1 : std::max(0, s - 1);
                mdp.transition_table[idx_p(s, a, next)] = 1.0;
                if (!mdp.is_terminal(s) && next == terminal_state)
                    mdp.reward_table[static_cast<std::size_t>(s) * 2 + a] = 1.0;
            }
        }
        return mdp;
    }

    // A per-episode random goal is not a stationary MDP.
    if (!env.goal_fixed())
        throw std::invalid_argument("to_tabular: goal must be fixed (randomize_goal=false or G marker)");
    Rng unused(0, 0);
    env.reset(unused);
    const int goal = env.goal_cell();
    if (goal < 0) throw std::invalid_argument("to_tabular: grid has no goal cell");

    mdp.n_states = static_cast<int>(env.floor_cells().size());
    mdp.transition_table.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states, 0.0);
    mdp.reward_table.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    mdp.terminal.assign(mdp.n_states, 0);
    mdp.terminal[goal] = 1;

    const GridLayout& lay = env.layout();
    std::vector<int> floor_of_flat(static_cast<std::size_t>(lay.width) * lay.height, -1);
    for (int i = 0; i < mdp.n_states; ++i) floor_of_flat[env.floor_cells()[i]] = i;
    static constexpr int dr[4] = {-1, 0, 1, 0};
    static constexpr int dc[4] = {0, 1, 0, -1};

    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (mdp.is_terminal(s)) {
                mdp.transition_table[idx_p(s, a, s)] = 1.0;
                continue;
            }
            const int flat = env.floor_cells()[s];
            const int r = flat / lay.width;
            const int c = flat % lay.width;
            const int nr = r + dr[a];
            const int nc = c + dc[a];
            int next = s;
            if (lay.in_bounds(nr, nc) && !lay.is_wall(nr, nc)) next = floor_of_flat[nr * lay.width + nc];
            mdp.transition_table[idx_p(s, a, next)] = 1.0;
            if (next == goal) {
                mdp.reward_table[static_cast<std::size_t>(s) * mdp.n_actions + a] =
                    spec.kind == EnvKind::FourRooms ? four_rooms_goal_reward(0, spec.max_steps) : 1.0;
            }
        }
    }
    return mdp;
}

std::vector<double> value_iteration(const TabularMdp& mdp, double discount, double tol) {
    if (!(discount >= 0.0 && discount < 1.0))
        throw std::invalid_argument("value_iteration: discount must lie in [0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");

    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    std::vector<double> q(static_cast<std::size_t>(S) * A, 0.0);
    std::vector<double> next_q(q.size(), 0.0);
    std::vector<double> state_value(S, 0.0);

    for (long iter = 0; iter < 1000000; ++iter) {
        for (int s = 0; s < S; ++s) {
            double best = q[static_cast<std::size_t>(s) * A];
            for (int a = 1; a < A; ++a) best = std::max(best, q[static_cast<std::size_t>(s) * A + a]);
            state_value[s] = best;
        }
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double backup = mdp.r(s, a);
                if (!mdp.is_terminal(s)) {
                    double expected = 0.0;
                    const double* row =
                        &mdp.transition_table[(static_cast<std::size_t>(s) * A + a) * S];
                    for (int next = 0; next < S; ++next) expected += row[next] * state_value[next];
                    backup += discount * expected;
                }
                const std::size_t i = static_cast<std::size_t>(s) * A + a;
                residual = std::max(residual, std::abs(backup - q[i]));
                next_q[i] = backup;
            }
        }
        q.swap(next_q);
        if (residual < tol) return q;
    }
    throw std::runtime_error("value_iteration: failed to converge");
}

}  // namespace rde
