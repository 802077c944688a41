#include <doctest.h>

#include <regex>
#include <sstream>

#include "oracle.hpp"
#include "safepomcp/domains.hpp"
#include "safepomcp/factored.hpp"

using namespace safepomcp;

namespace {

std::shared_ptr<const Pomdp> shared(Pomdp m) { return std::make_shared<const Pomdp>(std::move(m)); }

BeliefSupport global_set(const Pomdp& m, std::initializer_list<std::string_view> names) { return support_of(m, names); }

const Submodel& by_label(const FactoredRegion& f, const std::string& label) {
    for (const auto& s : f.submodels())
        if (s.label == label) return s;
    FAIL("no submodel " << label);
    return f.submodels().front();
}

}  // namespace

TEST_CASE("decomposition of the motivating world") {
    const auto m = generate(fig1_spec());
    const auto subs = decompose(m);
    REQUIRE(subs.size() == 4);
    const auto& room1 = subs[0];
    CHECK(room1.label == "I");
    CHECK(room1.own.size() == 9);
    BeliefSupport outlets = m.empty_support();
    room1.extended.for_each([&](StateId s) {
        if (!room1.own.contains(s)) outlets.insert(s);
    });
    CHECK(outlets == global_set(m, {"g14", "g15", "g41", "g51"}));
    CHECK(room1.to_global(room1.init) == global_set(m, {"g11", "g12", "g13", "g31"}));

    // Outlets are absorbing in the projection.
    for (const auto& [l, owner] : room1.outlets) {
        CHECK(owner != 0);
        for (ActionId a = 0; a < room1.model->num_actions(); ++a) CHECK(room1.model->transition_prob(l, a, l) == 1.0);
    }
    // Own states keep their dynamics.
    const auto g11 = *room1.to_local(*m.find_state("g11"));
    const auto east = *m.find_action("east");
    CHECK(room1.model->transition_prob(g11, east, *room1.to_local(*m.find_state("g12"))) ==
          m.transition_prob(*m.find_state("g11"), east, *m.find_state("g12")));

    // Rooms II and III can exit into room I (through the doors on its walls).
    std::vector<std::string> adjacent;
    for (auto k : room1.adjacency) adjacent.push_back(subs[k].label);
    std::sort(adjacent.begin(), adjacent.end());
    CHECK(adjacent == std::vector<std::string>{"II", "III"});
}

TEST_CASE("single-label partition gives the model back") {
    auto text = serialize_model(generate(fig1_spec()));
    text = std::regex_replace(text, std::regex(R"(^(region \d+) \S+$)", std::regex::multiline), "$1 all");
    const auto m = parse_model(text);
    const auto subs = decompose(m);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].outlets.empty());
    CHECK(subs[0].states.size() == m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s)
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            CHECK(subs[0].model->reward(s, a) == m.reward(s, a));
            for (const auto& e : m.transitions(s, a)) CHECK(subs[0].model->transition_prob(s, a, e.id) == e.prob);
        }
}

TEST_CASE("model without labels cannot be decomposed") {
    const auto m = parse_model("states: 1\nactions: 1\nobservations: 1\nT 0 0 0 1\nZ 0 0 0 1\ninit 0 1\nreach 0\n");
    CHECK_THROWS_AS(decompose(m), std::invalid_argument);
}

TEST_CASE("propagation on the two worked worlds") {
    SUBCASE("motivating world") {
        const auto m = shared(generate(fig1_spec()));
        const auto f = compute_factored_region(m);
        CHECK(f.union_contains(m->initial_support()));
        CHECK(f.union_contains(global_set(*m, {"g12", "g13"})));
        CHECK_FALSE(f.union_contains(global_set(*m, {"g13", "g14", "g15"})));
        const auto& room1 = by_label(f, "I");
        CHECK_FALSE(room1.reach.empty());
    }
    SUBCASE("second world: a centrally winning support the union misses") {
        const auto m = shared(generate(fig2_spec()));
        const auto f = compute_factored_region(m);
        const auto& room1 = by_label(f, "I");
        CHECK(room1.to_global(room1.reach) == global_set(*m, {"g15"}));
        CHECK_FALSE(f.union_contains(global_set(*m, {"g14"})));
        const auto w = compute_winning_region(m, Spec::from_model(*m), {global_set(*m, {"g14"})});
        CHECK(w.contains(global_set(*m, {"g14"})));
    }
}

TEST_CASE("union is contained in the centralized region with matching seeds") {
    for (const auto& spec : {fig1_spec(), fig2_spec(), obstacle_spec(6), obstacle_spec(8)}) {
        const auto m = shared(generate(spec));
        const auto f = compute_factored_region(m);
        auto seeds = f.global_elements();
        for (const auto& sub : f.submodels())
            sub.init.for_each([&](StateId l) { seeds.push_back(BeliefSupport(m->num_states(), {sub.states[l]})); });
        const auto w = compute_winning_region(m, f.spec(), seeds);
        for (const auto& u : f.global_elements()) CHECK(w.contains(u));
        for (std::size_t i = 0; i < f.submodels().size(); ++i) CHECK(verify_region(f.region(i)).empty());
    }
}

TEST_CASE("queue order does not change the result") {
    const auto m = shared(generate(obstacle_spec(8)));
    const auto base = compute_factored_region(m);
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        FactoredOptions opts;
        opts.shuffle_seed = seed;
        const auto f = compute_factored_region(m, opts);
        for (std::size_t i = 0; i < f.submodels().size(); ++i) {
            CHECK(f.submodels()[i].reach == base.submodels()[i].reach);
            CHECK(f.region(i).antichain() == base.region(i).antichain());
        }
    }
}

TEST_CASE("fixpoint: recomputing any submodel region changes nothing") {
    const auto m = shared(generate(fig1_spec()));
    const auto f = compute_factored_region(m);
    for (std::size_t i = 0; i < f.submodels().size(); ++i) {
        const auto& sub = f.submodels()[i];
        std::vector<BeliefSupport> seeds;
        sub.init.for_each([&](StateId l) { seeds.push_back(BeliefSupport(sub.states.size(), {l})); });
        for (const auto& e : f.region(i).antichain()) seeds.push_back(e);
        const auto again = compute_winning_region(sub.model, Spec{sub.reach, sub.avoid}, seeds);
        CHECK(again.antichain() == f.region(i).antichain());

        // No outlet left out of reach whose owner now covers it.
        for (const auto& [l, owner] : sub.outlets) {
            if (sub.reach.contains(l) || sub.avoid.contains(l)) continue;
            const auto lj = f.submodels()[owner].to_local(sub.states[l]);
            CHECK_FALSE(f.region(owner).contains_state(*lj));
        }
    }
}

TEST_CASE("queue pushes are bounded") {
    for (const auto& spec : {fig1_spec(), fig2_spec(), obstacle_spec(8), refuel_spec(5, 6)}) {
        const auto m = shared(generate(spec));
        const auto subs = decompose(*m);
        std::size_t outlets = 0, initial = 0;
        for (const auto& s : subs) {
            outlets += s.outlets.size();
            if (s.states.size() && (s.own & m->reach()).size()) initial += s.adjacency.size();
        }
        const auto f = compute_factored_region(m);
        CHECK(f.stats().pushes <= subs.size() * outlets + initial);
        CHECK(f.stats().pops == f.stats().pushes);
    }
}

TEST_CASE("small world: factored union against the powerset oracle") {
    const auto m = shared(generate(tiny_spec()));
    const auto n = m->num_states();
    const auto truth = oracle::winning_sets(*m, oracle::mask_of(m->reach()), oracle::mask_of(m->avoid()));
    FactoredOptions opts;
    opts.seed_all_subsets = true;
    const auto f = compute_factored_region(m, opts);
    REQUIRE(f.submodels().size() == 2);
    for (const auto& sub : f.submodels()) {
        // Each submodel region equals the oracle on the projection with its final reach set.
        const auto local = oracle::winning_sets(*sub.model, oracle::mask_of(sub.reach), oracle::mask_of(sub.avoid));
        const auto k = sub.states.size();
        for (oracle::Mask u = 1; u < (oracle::Mask{1} << k); ++u) {
            const auto lu = oracle::support_of_mask(k, u);
            CHECK(f.region(static_cast<std::size_t>(&sub - f.submodels().data())).contains(lu) == local[u]);
        }
        // Supports inside the room agree with the centralized oracle.
        for (oracle::Mask u = 1; u < (oracle::Mask{1} << n); ++u) {
            const auto gu = oracle::support_of_mask(n, u);
            if (!gu.is_subset_of(sub.own)) continue;
            CHECK(f.union_contains(gu) == truth[u]);
        }
    }
}

TEST_CASE("on-demand membership agrees with the union and stays sound") {
    const auto m = shared(generate(fig1_spec()));
    auto f = std::make_shared<const FactoredRegion>(compute_factored_region(m));
    FactoredMembership fm(f);
    const auto w = compute_winning_region(m, f->spec(), f->global_elements());
    for (const auto& u : f->global_elements()) CHECK(fm.contains(u));
    Rng rng(9);
    for (int i = 0; i < 300; ++i) {
        BeliefSupport u = m->empty_support();
        const auto centre = static_cast<StateId>(uniform_index(rng, m->num_states()));
        u.insert(centre);
        for (StateId s = 0; s < m->num_states(); ++s)
            if (uniform01(rng) < 0.05) u.insert(s);
        const bool accepted = fm.contains(u);
        if (f->union_contains(u)) CHECK(accepted);
        if (accepted) {
            const auto check = compute_winning_region(m, f->spec(), {u});
            CHECK(check.contains(u));
        }
        CHECK(fm.contains(u, false) == accepted);
    }
}

TEST_CASE("factored region file round trip") {
    const auto m = shared(generate(fig2_spec()));
    const auto f = compute_factored_region(m);
    std::stringstream ss;
    write_factored_region(ss, f);
    const auto back = read_factored_region(ss, m);
    REQUIRE(back.submodels().size() == f.submodels().size());
    for (std::size_t i = 0; i < f.submodels().size(); ++i) {
        CHECK(back.submodels()[i].label == f.submodels()[i].label);
        CHECK(back.submodels()[i].reach == f.submodels()[i].reach);
        CHECK(back.region(i).antichain() == f.region(i).antichain());
    }
}
