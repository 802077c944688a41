#include <doctest.h>

#include <cmath>
#include <functional>

#include "safepomcp/domains.hpp"
#include "safepomcp/pomcp.hpp"

using namespace safepomcp;

namespace {

// s0 --a0--> s1 (reward 100), s0 --a1--> s2 (reward 0); s1 and s2 absorb.
const char* kBandit = R"(states: 3
actions: 2
observations: 1
T 0 0 1 1
T 0 1 2 1
T 1 0 1 1
T 1 1 1 1
T 2 0 2 1
T 2 1 2 1
Z 0 0 0 1
Z 0 1 0 1
Z 1 0 0 1
Z 1 1 0 1
Z 2 0 0 1
Z 2 1 0 1
R 0 0 100
init 0 1
reach 1
reach 2
)";

PlannerConfig small(std::size_t sims, int depth = 20) {
    PlannerConfig cfg;
    cfg.simulations = sims;
    cfg.particles = 100;
    cfg.depth = depth;
    return cfg;
}

void walk(const TreeNode& h, const std::function<void(const TreeNode&)>& f) {
    f(h);
    for (const auto& [key, c] : h.children) walk(*c, f);
}

}  // namespace

TEST_CASE("ucb selection") {
    TreeNode node(1);
    node.expand(2);
    SUBCASE("unvisited action first") {
        node.visits = 4;
        node.actions[0] = {4, 10.0};
        CHECK(ucb_select(node, 1.0) == 1u);
    }
    SUBCASE("c = 0 is greedy") {
        node.visits = 8;
        node.actions[0] = {4, 10.0};
        node.actions[1] = {4, 9.0};
        CHECK(ucb_select(node, 0.0) == 0u);
    }
    SUBCASE("exploration bonus") {
        node.visits = 8;
        node.actions[0] = {6, 10.0};
        node.actions[1] = {2, 9.0};
        const double first = 10.0 + 2.0 * std::sqrt(std::log(8.0) / 6.0);
        const double second = 9.0 + 2.0 * std::sqrt(std::log(8.0) / 2.0);
        CHECK(first == doctest::Approx(11.177).epsilon(1e-4));
        CHECK(second == doctest::Approx(11.039).epsilon(1e-4));
        CHECK(ucb_select(node, 2.0) == 0u);
        // A smaller constant lets the better mean win outright; a larger one
        // favours the less visited action.
        CHECK(ucb_select(node, 0.5) == 0u);
        CHECK(ucb_select(node, 20.0) == 1u);
    }
    SUBCASE("shielded actions are skipped; all shielded is a dead node") {
        node.visits = 8;
        node.actions[0] = {6, 10.0};
        node.actions[1] = {2, 9.0};
        node.shield(1);
        CHECK(ucb_select(node, 2.0) == 0u);
        node.shield(0);
        CHECK_FALSE(ucb_select(node, 2.0).has_value());
    }
    SUBCASE("ties go to the lowest id") {
        node.visits = 8;
        node.actions[0] = {4, 5.0};
        node.actions[1] = {4, 5.0};
        CHECK(ucb_select(node, 1.0) == 0u);
    }
}

TEST_CASE("bandit: the rewarding arm is chosen") {
    const auto m = parse_model(kBandit);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        auto cfg = small(200, 1);
        auto root = initial_root(m, cfg, rng);
        hits += plan_step(m, root, cfg, rng).action == 0;
    }
    CHECK(hits >= 95);
}

TEST_CASE("bookkeeping with identical rewards") {
    const auto m = generate(tiny_spec());
    auto cfg = small(300);
    Rng rng(3);
    auto root = initial_root(m, cfg, rng);
    const auto r = plan_step(m, root, cfg, rng);
    CHECK(r.action < m.num_actions());
    CHECK(root.visits == cfg.simulations);
    CHECK(r.stats.simulations == cfg.simulations);

    // Every expanded node saw one leaf rollout plus one return per action visit.
    walk(root, [](const TreeNode& h) {
        if (!h.expanded()) return;
        std::uint64_t sum = 0;
        for (const auto& a : h.actions) sum += a.visits;
        CHECK(h.visits == sum + 1);
    });
}

TEST_CASE("particles stay inside exact supports") {
    const auto m = generate(fig1_spec());
    auto cfg = small(500);
    Rng rng(4);
    auto root = initial_root(m, cfg, rng);
    plan_step(m, root, cfg, rng);
    std::function<void(const TreeNode&, const BeliefSupport&)> check = [&](const TreeNode& h, const BeliefSupport& exact) {
        CHECK(h.particle_support.is_subset_of(exact));
        for (const auto& [key, c] : h.children) check(*c, support_post(m, exact, key.first, key.second));
    };
    check(root, *root.exact_support);
}

TEST_CASE("seeded determinism") {
    const auto m = generate(obstacle_spec(6));
    auto run = [&](std::uint64_t seed) {
        auto cfg = small(400);
        Rng rng(seed);
        auto root = initial_root(m, cfg, rng);
        const auto r = plan_step(m, root, cfg, rng);
        return std::tuple{r.action, root.visits, root.value, root.size()};
    };
    CHECK(run(5) == run(5));
}

TEST_CASE("obstacle world: the first move heads toward the flag") {
    const auto m = generate(obstacle_spec(6));
    const auto start = m.initial_support().first();

    // Finite-horizon value iteration on the fully observable model.
    const int horizon = 100;
    std::vector<double> v(m.num_states(), 0.0), q(m.num_actions());
    for (int k = 0; k < horizon; ++k) {
        std::vector<double> next(m.num_states(), 0.0);
        for (StateId s = 0; s < m.num_states(); ++s) {
            if (m.is_terminal(s)) continue;
            double best = -1e300;
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                double x = m.reward(s, a);
                for (const auto& e : m.transitions(s, a)) x += e.prob * v[e.id];
                best = std::max(best, x);
                if (s == start) q[a] = x;
            }
            next[s] = best;
        }
        v = std::move(next);
    }
    // Moves that beat bumping into the boundary.
    double bump = -1e300;
    for (ActionId a = 0; a < m.num_actions(); ++a)
        if (m.transition_prob(start, a, start) == 1.0) bump = std::max(bump, q[a]);
    std::vector<bool> progress(m.num_actions());
    for (ActionId a = 0; a < m.num_actions(); ++a) progress[a] = q[a] > bump + 0.25;
    CHECK(progress[*m.find_action("east")]);
    CHECK(progress[*m.find_action("south")]);

    // The gap to a wasted move is one reward unit on a 1000-unit scale, so
    // this needs the full simulation budget.
    int good = 0;
    const int runs = 30;
    for (int seed = 0; seed < runs; ++seed) {
        PlannerConfig cfg;
        cfg.particles = 1000;
        Rng rng(static_cast<std::uint64_t>(seed));
        auto root = initial_root(m, cfg, rng);
        good += progress[plan_step(m, root, cfg, rng).action];
    }
    CHECK(good >= 0.9 * runs);
}

TEST_CASE("advance_root") {
    SUBCASE("deterministic model gives the Dirac successor") {
        const auto m = parse_model(kBandit);
        auto cfg = small(10);
        Rng rng(1);
        auto root = initial_root(m, cfg, rng);
        auto next = advance_root(m, std::move(root), 0, 0, cfg, rng);
        CHECK(next.particle_support == BeliefSupport(3, {1}));
        CHECK(next.particles.size() == cfg.particles);
        CHECK(next.exact_support == BeliefSupport(3, {1}));
    }
    SUBCASE("exact support follows support_post") {
        const auto m = generate(fig1_spec());
        auto cfg = small(50);
        Rng rng(2);
        auto root = initial_root(m, cfg, rng);
        const auto east = *m.find_action("east");
        const auto o = *m.find_observation("g13");
        auto next = advance_root(m, std::move(root), east, o, cfg, rng);
        CHECK(next.exact_support == support_post(m, support_of(m, {"g11"}), east, o));
        CHECK(next.particle_support.is_subset_of(*next.exact_support));
    }
    SUBCASE("a full child is only truncated") {
        const auto m = parse_model(kBandit);
        auto cfg = small(10);
        cfg.particles = 5;
        Rng rng(1);
        auto root = initial_root(m, cfg, rng);
        auto& child = root.make_child(0, 0);
        for (int i = 0; i < 8; ++i) child.add_particle(1);
        auto next = advance_root(m, std::move(root), 0, 0, cfg, rng);
        CHECK(next.particles == std::vector<StateId>(5, 1));
    }
    SUBCASE("impossible observation") {
        const auto m = generate(fig1_spec());
        auto cfg = small(10);
        Rng rng(2);
        auto root = initial_root(m, cfg, rng);
        CHECK_THROWS_AS(advance_root(m, std::move(root), *m.find_action("east"), *m.find_observation("g66"), cfg, rng),
                        ImpossibleObservation);
    }
    SUBCASE("collapse without an exact support") {
        const auto m = generate(fig1_spec());
        auto cfg = small(10);
        Rng rng(2);
        auto root = initial_root(m, cfg, rng);
        root.exact_support.reset();
        CHECK_THROWS_AS(advance_root(m, std::move(root), *m.find_action("east"), *m.find_observation("g66"), cfg, rng),
                        BeliefCollapse);
    }
}

TEST_CASE("config validation") {
    auto cfg = PlannerConfig::desk();
    CHECK(cfg.simulations == 2000);
    CHECK(cfg.particles == 1000);
    CHECK(cfg.depth == 100);
    cfg.validate();
    cfg.discount = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig::desk();
    cfg.simulations = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
