#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracle.hpp"
#include "safepomcp/domains.hpp"
#include "safepomcp/winreg.hpp"

using namespace safepomcp;

namespace {

std::shared_ptr<const Pomdp> shared(Pomdp m) { return std::make_shared<const Pomdp>(std::move(m)); }

std::vector<BeliefSupport> all_subsets(std::size_t n, const BeliefSupport& within) {
    std::vector<BeliefSupport> out;
    for (oracle::Mask u = 1; u < (oracle::Mask{1} << n); ++u) {
        auto s = oracle::support_of_mask(n, u);
        if (s.is_subset_of(within)) out.push_back(std::move(s));
    }
    return out;
}

BeliefSupport complement(const BeliefSupport& u) {
    BeliefSupport out(u.universe());
    for (StateId s = 0; s < u.universe(); ++s)
        if (!u.contains(s)) out.insert(s);
    return out;
}

// Replays a witness with the oracle's post and checks it ends in reach
// while every intermediate support is winning.
void check_witness(const WinningRegion& w, const Pomdp& m, const BeliefSupport& start, const WitnessPath& path) {
    auto u = oracle::mask_of(start);
    const auto reach = oracle::mask_of(w.spec().reach);
    for (auto [a, o] : path) {
        REQUIRE(w.contains(oracle::support_of_mask(m.num_states(), u)));
        const auto allowed = allowed_actions(w, m, oracle::support_of_mask(m.num_states(), u));
        CHECK(std::find(allowed.begin(), allowed.end(), a) != allowed.end());
        u = oracle::post(m, u, a, o);
        REQUIRE(u != 0);
    }
    CHECK((u & ~reach) == 0);
}

}  // namespace

TEST_CASE("support graph examples") {
    const auto m = shared(generate(fig1_spec()));
    SUBCASE("absorbing seed is a single vertex with self-loops") {
        const BeliefSupport goal(m->num_states(), {m->reach().first()});
        const auto g = build_support_graph(m, {goal}, m->avoid());
        CHECK(g.size() == 1);
        for (const auto& e : g.edges(0)) CHECK(e.target == 0);
    }
    SUBCASE("closure from g11 contains the east posts") {
        const auto g = build_support_graph(m, {support_of(*m, {"g11"})}, m->avoid());
        CHECK(g.find(support_of(*m, {"g12", "g13"})).has_value());
        // Observation-free union of the posts from {g12, g13} is not itself a
        // post; the branch supports partition it.
        const auto east = *m->find_action("east");
        for (const auto& b : support_post_all(*m, support_of(*m, {"g12", "g13"}), east))
            CHECK(g.find(b.support).has_value());
    }
    SUBCASE("closed under posts and seeds reachable") {
        const auto g = build_support_graph(m, {m->initial_support()}, m->avoid());
        for (std::uint32_t v = 0; v < g.size(); ++v) {
            if (g.vertex(v).intersects(m->avoid())) {
                CHECK_FALSE(g.expanded(v));
                continue;
            }
            for (ActionId a = 0; a < m->num_actions(); ++a)
                for (const auto& b : support_post_all(*m, g.vertex(v), a)) CHECK(g.find(b.support).has_value());
        }
    }
    SUBCASE("closed seed set is the graph") {
        const auto g = build_support_graph(m, {m->initial_support()}, m->avoid());
        const auto again = build_support_graph(m, g.vertices(), m->avoid());
        CHECK(again.size() == g.size());
    }
    SUBCASE("vertex cap") {
        RegionOptions opts;
        opts.max_vertices = 3;
        CHECK_THROWS_AS(build_support_graph(m, {m->initial_support()}, m->avoid(), opts), GraphCapExceeded);
    }
}

TEST_CASE("deadline in the past times out") {
    const auto m = shared(generate(obstacle_spec(6)));
    RegionOptions opts;
    opts.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
    CHECK_THROWS_AS(compute_winning_region(m, opts), RegionTimeout);
}

TEST_CASE("motivating world region queries") {
    const auto m = shared(generate(fig1_spec()));
    const auto w = compute_winning_region(m);
    CHECK(w.contains(m->initial_support()));
    CHECK_FALSE(w.contains(support_of(*m, {"g13", "g14", "g15"})));
    CHECK(w.contains(support_of(*m, {"g12", "g13"})));

    const auto east = *m->find_action("east");
    const auto allowed = allowed_actions(w, *m, support_of(*m, {"g12", "g13"}));
    CHECK(std::find(allowed.begin(), allowed.end(), east) == allowed.end());
    CHECK_FALSE(allowed.empty());

    // Per-action brute force at {g11}.
    const auto g11 = support_of(*m, {"g11"});
    std::vector<ActionId> expected;
    for (ActionId a = 0; a < m->num_actions(); ++a) {
        bool ok = true;
        for (ObservationId o = 0; o < m->num_observations(); ++o) {
            const auto p = oracle::post(*m, oracle::mask_of(g11), a, o);
            if (p && !w.contains(oracle::support_of_mask(m->num_states(), p))) ok = false;
        }
        if (ok) expected.push_back(a);
    }
    CHECK(allowed_actions(w, *m, g11) == expected);

    const BeliefSupport goal(m->num_states(), {m->reach().first()});
    CHECK(allowed_actions(w, *m, goal).size() == m->num_actions());
    CHECK(productivity_witness(w, *m, goal).empty());

    for (const auto& e : w.antichain()) {
        CHECK(w.contains(e));
        CHECK_FALSE(e.intersects(m->avoid()));
    }
    CHECK_FALSE(w.contains(support_of(*m, {"g15"})));
    CHECK_THROWS_AS(allowed_actions(w, *m, support_of(*m, {"g13", "g14", "g15"})), ShieldContractError);
    CHECK(verify_region(w).empty());
}

TEST_CASE("region already at goal contains every seed") {
    const auto m = shared(generate(obstacle_spec(4, 2)));
    const auto seeds = std::vector<BeliefSupport>{m->initial_support()};
    Spec spec{complement(m->avoid()), m->avoid()};
    const auto w = compute_winning_region(m, spec, seeds);
    for (const auto& s : seeds) CHECK(w.contains(s));
}

TEST_CASE("antichain equals the powerset oracle on the small world") {
    const auto m = shared(generate(tiny_spec()));
    REQUIRE(m->num_states() <= 10);
    const auto n = m->num_states();
    const auto universe = BeliefSupport::from_range(n, std::vector<StateId>{}) | complement(m->empty_support());
    const auto seeds = all_subsets(n, universe);
    const Spec spec = Spec::from_model(*m);
    const auto w = compute_winning_region(m, spec, seeds);
    const auto truth = oracle::winning_sets(*m, oracle::mask_of(m->reach()), oracle::mask_of(m->avoid()));
    std::size_t winning = 0;
    for (const auto& u : seeds) {
        const bool expected = truth[oracle::mask_of(u)];
        CHECK(w.contains(u) == expected);
        winning += expected;
    }
    CHECK(winning > 0);

    // Seeding only the initial support: every reachable support agrees too.
    const auto w0 = compute_winning_region(m);
    const auto g = build_support_graph(m, {m->initial_support()}, m->avoid());
    for (const auto& u : g.vertices()) CHECK(w0.contains(u) == truth[oracle::mask_of(u)]);

    // Witnesses replay under the oracle.
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto& e = w.antichain()[uniform_index(rng, w.antichain().size())];
        check_witness(w, *m, e, productivity_witness(w, *m, e));
    }
}

TEST_CASE("downward closure and step closure") {
    const auto m = shared(generate(fig2_spec()));
    const auto w = compute_winning_region(m);
    Rng rng(11);
    for (const auto& e : w.antichain()) {
        // Random non-empty subsets of an element stay winning.
        for (int k = 0; k < 5; ++k) {
            BeliefSupport v = m->empty_support();
            e.for_each([&](StateId s) {
                if (uniform01(rng) < 0.5) v.insert(s);
            });
            if (v.empty()) continue;
            CHECK(w.contains(v));
        }
        for (ActionId a : allowed_actions(w, *m, e))
            for (const auto& b : support_post_all(*m, e, a)) CHECK(w.contains(b.support));
        check_witness(w, *m, e, productivity_witness(w, *m, e));
    }
}

TEST_CASE("enlarging reach never removes a support") {
    const auto m = shared(generate(obstacle_spec(5, 4)));
    const auto g = build_support_graph(m, {m->initial_support()}, m->avoid());
    const Spec base = Spec::from_model(*m);
    const auto w = compute_winning_region(m, base, g.vertices());
    Spec bigger = base;
    Rng rng(2);
    for (StateId s = 0; s < m->num_states(); ++s)
        if (!m->avoid().contains(s) && uniform01(rng) < 0.3) bigger.reach.insert(s);
    const auto w2 = compute_winning_region(m, bigger, g.vertices());
    for (const auto& u : g.vertices())
        if (w.contains(u)) CHECK(w2.contains(u));
}

TEST_CASE("solver re-solves after reach changes") {
    const auto m = shared(generate(fig1_spec()));
    const Spec spec = Spec::from_model(*m);
    RegionSolver solver(m, spec);
    solver.add_seeds({m->initial_support()});
    const auto before = solver.region();
    solver.set_reach(spec.reach | support_of(*m, {"g12"}));
    const auto after = solver.region();
    for (const auto& e : before.antichain()) CHECK(after.contains(e));
    solver.set_reach(spec.reach);
    CHECK(solver.region().antichain() == before.antichain());
}

TEST_CASE("region file round trip and mismatch detection") {
    const auto m = shared(generate(fig1_spec()));
    const auto w = compute_winning_region(m);
    std::stringstream ss;
    write_region(ss, w);
    const auto back = read_region(ss, m);
    CHECK(back.antichain() == w.antichain());
    CHECK(back.spec() == w.spec());

    std::stringstream again;
    write_region(again, w);
    const auto other = shared(generate(fig2_spec()));
    CHECK_THROWS(read_region(again, other));
}

TEST_CASE("audit flags a fabricated element") {
    // State 2 loops forever without reaching the goal.
    const auto m = shared(parse_model(R"(states: 3
actions: 1
observations: 1
T 0 0 1 1
T 1 0 1 1
T 2 0 2 1
Z 0 0 0 1
Z 1 0 0 1
Z 2 0 0 1
init 0 1
reach 1
)"));
    const auto w = compute_winning_region(m);
    CHECK(verify_region(w).empty());
    CHECK_FALSE(w.contains(BeliefSupport(3, {2})));
    auto elements = w.antichain();
    elements.push_back(BeliefSupport(3, {2}));
    const WinningRegion bad(m, w.spec(), elements);
    CHECK_FALSE(verify_region(bad).empty());
}
