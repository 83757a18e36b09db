#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rde/agents.hpp"
#include "rde/tabular.hpp"

using namespace rde;

namespace {

bool same_params(const Mlp& a, const Mlp& b) {
    for (int l = 0; l < a.layer_count(); ++l) {
        if (a.weights[l].data != b.weights[l].data) return false;
        if (a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

std::vector<const Transition*> as_batch(const std::vector<Transition>& items) {
    std::vector<const Transition*> batch;
    for (const Transition& t : items) batch.push_back(&t);
    return batch;
}

}  // namespace

TEST_CASE("epsilon schedule") {
    EpsilonSchedule sched{0.9, 0.05, 1000};
    CHECK(sched.at(0) == 0.9);
    CHECK(sched.at(500) == doctest::Approx(0.475));
    CHECK(sched.at(1000) == 0.05);
    CHECK(sched.at(100000) == 0.05);
}

TEST_CASE("dqn_td_target") {
    Mlp target;
    target.layer_dims = {1, 2};
    target.weights = {Matrix(2, 1)};
    target.weights[0].at(0, 0) = 2.0;  // q = (2, 1) at obs 1
    target.weights[0].at(1, 0) = 1.0;
    target.biases = {{0.0, 0.0}};

    std::vector<Transition> items(3);
    for (Transition& t : items) {
        t.obs = {1.0};
        t.next_obs = {1.0};
        t.reward = 1.0;
    }
    items[1].done = true;

    SUBCASE("bootstrapped and terminal") {
        const auto y = dqn_td_target(as_batch(items), target, 0.9);
        CHECK(y[0] == doctest::Approx(1.0 + 0.9 * 2.0));  // 2.8
        CHECK(y[1] == 1.0);
        CHECK(y[2] == doctest::Approx(2.8));
    }
    SUBCASE("discount zero collapses to rewards") {
        const auto y = dqn_td_target(as_batch(items), target, 0.0);
        for (double v : y) CHECK(v == 1.0);
    }
    SUBCASE("empty batch throws") {
        CHECK_THROWS_AS(dqn_td_target({}, target, 0.9), std::invalid_argument);
    }
}

TEST_CASE("action selection") {
    DqnConfig cfg;
    cfg.hidden = {8};
    Rng init(5, 0);
    DqnAgent agent(3, 3, cfg, init);

    SUBCASE("greedy argmax with lowest-index tie-break") {
        Mlp probe;
        probe.layer_dims = {3, 3};
        probe.weights = {Matrix(3, 3)};
        probe.biases = {{1.0, 3.0, 2.0}};
        // act_greedy reads the agent's own net, so check argmax helpers via
        // an agent whose observation picks known biases: simpler to verify
        // the tie-break contract through value ordering on a constructed
        // agent is overkill; use q_values ordering directly.
        const auto q = agent.q_values(std::vector<double>{1.0, 0.0, 0.0});
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (q[i] > q[best]) best = i;
        CHECK(agent.act_greedy(std::vector<double>{1.0, 0.0, 0.0}) == best);
    }
    SUBCASE("epsilon = 1 is uniform within 3 sigma") {
        Rng rng(7, 0);
        std::vector<int> counts(3, 0);
        const int draws = 60000;
        const std::vector<double> obs = {0.5, -0.5, 1.0};
        for (int i = 0; i < draws; ++i) counts[agent.act_epsilon(obs, 1.0, rng)] += 1;
        const double expected = draws / 3.0;
        const double sigma = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
        for (int c : counts) CHECK(std::abs(c - expected) < 3.0 * sigma);
    }
    SUBCASE("epsilon = 0 is exactly greedy") {
        Rng rng(7, 0);
        const std::vector<double> obs = {0.5, -0.5, 1.0};
        for (int i = 0; i < 10; ++i)
            CHECK(agent.act_epsilon(obs, 0.0, rng) == agent.act_greedy(obs));
    }
}

TEST_CASE("greedy tie-break picks the lowest index") {
    // A zero-weight network scores every action identically.
    DqnConfig cfg;
    cfg.hidden = {4};
    Rng init(1, 0);
    DqnAgent agent(2, 2, cfg, init);
    Mlp zeroed = agent.online();
    for (auto& m : zeroed.weights)
        for (double& v : m.data) v = 0.0;
    // Rebuild an agent-like check through q_values of the zero net.
    const auto q = forward(zeroed, std::vector<double>{1.0, 0.0});
    CHECK(q[0] == q[1]);
    int best = 0;
    for (int i = 1; i < 2; ++i)
        if (q[i] > q[best]) best = i;
    CHECK(best == 0);
}

TEST_CASE("dqn_update") {
    DqnConfig cfg;
    cfg.hidden = {8};
    cfg.discount = 0.9;
    cfg.learning_rate = 1e-3;

    SUBCASE("already-consistent batch gives zero loss and no change") {
        Rng init(3, 0);
        DqnAgent agent(2, 2, cfg, init);
        std::vector<Transition> items(2);
        for (int i = 0; i < 2; ++i) {
            items[i].obs = {1.0, 0.0};
            items[i].next_obs = {0.0, 1.0};
            items[i].action = i;
            items[i].done = true;  // y = r
            items[i].reward = agent.q_values(items[i].obs)[i];
        }
        const Mlp before = agent.online();
        Rng rng(0, 0);
        const double loss = agent.update(as_batch(items), rng);
        CHECK(loss == 0.0);
        CHECK(same_params(agent.online(), before));
    }
    SUBCASE("fixed batch and seed give identical post-update weights") {
        Rng init1(3, 0), init2(3, 0);
        DqnAgent a1(2, 2, cfg, init1);
        DqnAgent a2(2, 2, cfg, init2);
        std::vector<Transition> items(4);
        for (int i = 0; i < 4; ++i) {
            items[i].obs = {1.0, 0.0};
            items[i].next_obs = {0.0, 1.0};
            items[i].action = i % 2;
            items[i].reward = 0.5 * i;
        }
        Rng r1(9, 9), r2(9, 9);
        a1.update(as_batch(items), r1);
        a2.update(as_batch(items), r2);
        CHECK(same_params(a1.online(), a2.online()));
        CHECK(same_params(a1.target(), a2.target()));
    }
    SUBCASE("target network follows only the declared rule") {
        DqnConfig hard = cfg;
        hard.target_update_period = 3;
        Rng init(4, 0);
        DqnAgent agent(2, 2, hard, init);
        const Mlp target0 = agent.target();
        std::vector<Transition> items(2);
        for (int i = 0; i < 2; ++i) {
            items[i].obs = {1.0, 0.0};
            items[i].next_obs = {0.0, 1.0};
            items[i].action = i;
            items[i].reward = 1.0;
        }
        Rng rng(0, 0);
        agent.update(as_batch(items), rng);
        CHECK(same_params(agent.target(), target0));
        agent.update(as_batch(items), rng);
        CHECK(same_params(agent.target(), target0));
        agent.update(as_batch(items), rng);
        CHECK(same_params(agent.target(), agent.online()));
    }
}

TEST_CASE("dqn learns the chain oracle Q values") {
    EnvSpec spec;
    spec.kind = EnvKind::Chain;
    spec.chain_length = 5;
    spec.max_steps = 50;
    const TabularMdp mdp = to_tabular(spec);
    const auto q_star = value_iteration(mdp, 0.9, 1e-10);

    DqnConfig cfg;
    cfg.hidden = {32};
    cfg.discount = 0.9;
    cfg.learning_rate = 1e-3;
    cfg.tau = 0.01;
    Rng init(1, 100);
    DqnAgent agent(5, 2, cfg, init);

    // Fill the buffer with uniform-random behavior, then train offline.
    ReplayBuffer buffer(20000, 5);
    Environment env(spec);
    Rng env_rng(1, 2);
    Rng action_rng(1, 3);
    Observation obs = env.reset(env_rng);
    for (int t = 0; t < 5000; ++t) {
        const int a = static_cast<int>(action_rng.uniform_int(2));
        const StepResult r = env.step(a, env_rng);
        buffer.push(Transition{obs, a, r.reward, r.cost, r.next_obs, r.done});
        obs = (r.done || r.truncated) ? env.reset(env_rng) : r.next_obs;
    }
    Rng sample_rng(1, 4);
    Rng update_rng(1, 5);
    for (int u = 0; u < 20000; ++u) {
        const auto batch = buffer.sample(32, sample_rng);
        agent.update(batch, update_rng);
    }

    double max_err = 0.0;
    for (int s = 0; s < 4; ++s) {  // exclude the terminal state
        std::vector<double> one_hot(5, 0.0);
        one_hot[s] = 1.0;
        const auto q = agent.q_values(one_hot);
        for (int a = 0; a < 2; ++a)
            max_err = std::max(max_err, std::abs(q[a] - q_star[s * 2 + a]));
    }
    CHECK(max_err < 0.05);
}

TEST_CASE("cvar") {
    SUBCASE("zero variance returns the mean") { CHECK(cvar(2.0, 0.0, 0.5) == 2.0); }
    SUBCASE("reference value at alpha 0.5") {
        CHECK(std::abs(cvar(2.0, 4.0, 0.5) - 3.5957691) < 1e-6);
    }
    SUBCASE("risk-neutral limit") {
        CHECK(cvar(2.0, 100.0, 1.0) == 2.0);
        CHECK(cvar(-1.0, 7.0, 1.0) == -1.0);
    }
    SUBCASE("monotone in mean and variance, decreasing in risk level") {
        CHECK(cvar(2.0, 4.0, 0.5) < cvar(2.5, 4.0, 0.5));
        CHECK(cvar(2.0, 4.0, 0.5) < cvar(2.0, 5.0, 0.5));
        double previous = cvar(1.0, 4.0, 0.05);
        for (double alpha : {0.1, 0.25, 0.5, 0.75, 0.99}) {
            const double value = cvar(1.0, 4.0, alpha);
            CHECK(value < previous);
            previous = value;
        }
    }
    SUBCASE("domain errors") {
        CHECK_THROWS_AS(cvar(0.0, 1.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(cvar(0.0, 1.0, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(cvar(0.0, -1.0, 0.5), std::invalid_argument);
    }
}

TEST_CASE("safe actor-critic update") {
    SafeAcConfig cfg;
    cfg.hidden = {16};
    cfg.discount = 0.9;
    cfg.learning_rate = 1e-3;
    cfg.tau = 0.01;

    SUBCASE("zero costs drive the cost critics and lambda to zero") {
        SafeAcConfig zc = cfg;
        zc.cost_budget = 1.0;
        zc.lambda_init = 0.5;
        Rng init(2, 0);
        SafeAcAgent agent(2, 2, zc, init);
        // Closed state set: every bootstrapped next state is itself trained.
        std::vector<std::vector<double>> states;
        Rng gen(3, 0);
        for (int i = 0; i < 4; ++i) states.push_back({gen.uniform(), gen.uniform()});
        std::vector<Transition> items;
        for (int i = 0; i < 4; ++i) {
            for (int a = 0; a < 2; ++a) {
                Transition t;
                t.obs = states[i];
                t.next_obs = states[(i + a + 1) % 4];
                t.action = a;
                t.reward = gen.uniform();
                t.cost = 0.0;
                items.push_back(t);
            }
        }
        Rng update_rng(4, 0);
        for (int u = 0; u < 5000; ++u) agent.update(as_batch(items), update_rng);
        CHECK(agent.lambda() == 0.0);
        // The exp transform reaches zero only asymptotically; 0.1 is far
        // below the ~1.0 starting point.
        for (const auto& state : states) {
            for (int a = 0; a < 2; ++a) {
                CHECK(std::abs(agent.cost_mean_value(state, a)) < 0.05);
                CHECK(agent.cost_std_value(state, a) < 0.1);
            }
        }
    }
    SUBCASE("fixed seed and batch give deterministic parameters") {
        Rng i1(5, 0), i2(5, 0);
        SafeAcAgent a1(2, 2, cfg, i1);
        SafeAcAgent a2(2, 2, cfg, i2);
        std::vector<Transition> items(4);
        Rng gen(6, 0);
        for (Transition& t : items) {
            t.obs = {gen.uniform(), gen.uniform()};
            t.next_obs = {gen.uniform(), gen.uniform()};
            t.action = static_cast<int>(gen.uniform_int(2));
            t.reward = gen.uniform();
            t.cost = gen.uniform();
        }
        Rng r1(7, 7), r2(7, 7);
        for (int u = 0; u < 50; ++u) {
            a1.update(as_batch(items), r1);
            a2.update(as_batch(items), r2);
        }
        CHECK(a1.lambda() == a2.lambda());
        const std::vector<double> obs = {0.1, 0.9};
        CHECK(a1.action_probs(obs) == a2.action_probs(obs));
        CHECK(a1.value_of(obs, 0) == a2.value_of(obs, 0));
    }
    SUBCASE("one-state CMDP with a costly action learns to avoid it") {
        // Action 1 incurs cost 1 every step; with budget 0 the dual ascent
        // must push the actor onto action 0.
        SafeAcConfig cmdp = cfg;
        cmdp.cost_budget = 0.0;
        cmdp.lambda_step = 0.01;
        Rng init(8, 0);
        SafeAcAgent agent(1, 2, cmdp, init);
        std::vector<Transition> items;
        for (int a = 0; a < 2; ++a) {
            Transition t;
            t.obs = {1.0};
            t.next_obs = {1.0};
            t.action = a;
            t.reward = 0.0;
            t.cost = a == 1 ? 1.0 : 0.0;
            t.done = false;
            items.push_back(t);
        }
        Rng update_rng(9, 0);
        for (int u = 0; u < 4000; ++u) agent.update(as_batch(items), update_rng);
        CHECK(agent.lambda() > 0.0);
        const auto probs = agent.action_probs(std::vector<double>{1.0});
        CHECK(probs[0] > 0.9);
    }
    SUBCASE("lambda never goes negative") {
        Rng init(10, 0);
        SafeAcConfig big_budget = cfg;
        big_budget.cost_budget = 100.0;
        SafeAcAgent agent(1, 2, big_budget, init);
        Transition t;
        t.obs = {1.0};
        t.next_obs = {1.0};
        t.action = 0;
        std::vector<Transition> items = {t};
        Rng update_rng(11, 0);
        for (int u = 0; u < 200; ++u) {
            agent.update(as_batch(items), update_rng);
            CHECK(agent.lambda() >= 0.0);
        }
    }
}

TEST_CASE("agent reset semantics") {
    SUBCASE("full dqn reset matches a fresh agent from the same stream") {
        DqnConfig cfg;
        cfg.hidden = {8, 8};
        Rng init(12, 0);
        DqnAgent agent(3, 2, cfg, init);
        std::vector<Transition> items(2);
        for (int i = 0; i < 2; ++i) {
            items[i].obs = {1.0, 0.0, 0.0};
            items[i].next_obs = {0.0, 1.0, 0.0};
            items[i].action = i;
            items[i].reward = 1.0;
        }
        Rng update_rng(0, 0);
        for (int u = 0; u < 20; ++u) agent.update(as_batch(items), update_rng);

        Rng reset_stream(77, 3);
        agent.reset(-1, reset_stream);
        Rng fresh_stream(77, 3);
        const Mlp fresh = mlp_init({3, 8, 8, 2}, fresh_stream);
        CHECK(same_params(agent.online(), fresh));
        CHECK(same_params(agent.target(), fresh));
        CHECK(agent.adam().step_count == 0);
    }
    SUBCASE("partial reset keeps early layers") {
        DqnConfig cfg;
        cfg.hidden = {8, 8};
        Rng init(13, 0);
        DqnAgent agent(3, 2, cfg, init);
        const Mlp before = agent.online();
        Rng reset_stream(1, 1);
        agent.reset(1, reset_stream);
        CHECK(agent.online().weights[0].data == before.weights[0].data);
        CHECK(agent.online().weights[1].data == before.weights[1].data);
        CHECK(agent.online().weights[2].data != before.weights[2].data);
        // Target tail follows the freshly reset online layers.
        CHECK(agent.target().weights[2].data == agent.online().weights[2].data);
    }
    SUBCASE("full safe reset restores lambda") {
        SafeAcConfig cfg;
        cfg.hidden = {8};
        cfg.cost_budget = 0.0;
        cfg.lambda_init = 0.0;
        Rng init(14, 0);
        SafeAcAgent agent(1, 2, cfg, init);
        Transition t;
        t.obs = {1.0};
        t.next_obs = {1.0};
        t.action = 1;
        t.cost = 1.0;
        std::vector<Transition> items = {t};
        Rng update_rng(0, 0);
        for (int u = 0; u < 100; ++u) agent.update(as_batch(items), update_rng);
        CHECK(agent.lambda() > 0.0);
        Rng reset_stream(2, 2);
        agent.reset(-1, reset_stream);
        CHECK(agent.lambda() == 0.0);
    }
}
