#include <doctest.h>

#include <cmath>
#include <map>

#include "safepomcp/domains.hpp"
#include "safepomcp/model.hpp"

using namespace safepomcp;

namespace {

const char* kTwoState = R"(# two states, one action
states: 2
actions: 1
observations: 1
state 0 s0
state 1 s1
T 0 0 1 1.0
T 1 0 1 1.0
Z 0 0 0 1.0
Z 1 0 0 1.0
R 0 0 -1
init 0 1.0
reach 1
)";

ModelErrorKind error_kind(std::string_view text) {
    try {
        parse_model(text);
    } catch (const ModelError& e) {
        return e.kind();
    }
    FAIL("expected a model error");
    return ModelErrorKind::Invalid;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("minimal document parses") {
    const auto m = parse_model(kTwoState);
    CHECK(m.num_states() == 2);
    CHECK(m.num_actions() == 1);
    CHECK(m.state_name(1) == "s1");
    CHECK(m.reward(0, 0) == -1.0);
    CHECK(m.reward(1, 0) == 0.0);
    CHECK(m.reach().contains(1));
    CHECK(m.initial_support() == BeliefSupport(2, {0}));
    CHECK(m.is_terminal(1));
    CHECK_FALSE(m.is_terminal(0));
}

TEST_CASE("parse errors are typed and located") {
    const std::string base = kTwoState;
    SUBCASE("probability sum") {
        CHECK(error_kind(replace(base, "T 0 0 1 1.0", "T 0 0 1 0.9")) == ModelErrorKind::ProbabilitySum);
    }
    SUBCASE("dangling id") {
        CHECK(error_kind(replace(base, "T 0 0 1 1.0", "T 0 0 7 1.0")) == ModelErrorKind::DanglingId);
    }
    SUBCASE("reach and avoid overlap") {
        CHECK(error_kind(base + "avoid 1\n") == ModelErrorKind::ReachAvoidOverlap);
    }
    SUBCASE("avoid in initial support") {
        CHECK(error_kind(base + "avoid 0\n") == ModelErrorKind::AvoidInInitial);
    }
    SUBCASE("syntax error carries the line") {
        try {
            parse_model(replace(base, "R 0 0 -1", "R 0 0 minus-one"));
            FAIL("no error");
        } catch (const ModelError& e) {
            CHECK(e.kind() == ModelErrorKind::Syntax);
            CHECK(e.line() == 11);
        }
    }
    SUBCASE("non-absorbing reach") {
        const auto text = replace(base, "T 1 0 1 1.0", "T 1 0 0 1.0");
        BuildOptions strict;
        strict.reach_policy = ReachPolicy::Reject;
        try {
            parse_model(text, strict);
            FAIL("no error");
        } catch (const ModelError& e) {
            CHECK(e.kind() == ModelErrorKind::NonAbsorbingReach);
        }
    }
}

TEST_CASE("default reach policy rewrites rows to self-loops with a warning") {
    const auto m = parse_model(replace(kTwoState, "T 1 0 1 1.0", "T 1 0 0 1.0"));
    CHECK(m.transition_prob(1, 0, 1) == 1.0);
    CHECK(m.transition_prob(1, 0, 0) == 0.0);
    CHECK_FALSE(m.warnings().empty());
}

TEST_CASE("generated models round-trip through the text format") {
    for (const auto& spec : {obstacle_spec(6), fig1_spec(), fig2_spec(), refuel_spec(4, 3), rocksample_spec(4, 2)}) {
        const auto m = generate(spec);
        const auto text = serialize_model(m);
        const auto back = parse_model(text);
        CHECK(back == m);
        CHECK(serialize_model(back) == text);
        CHECK(back.content_hash() == m.content_hash());
    }
}

TEST_CASE("support posts in the motivating world") {
    const auto m = generate(fig1_spec());
    const auto east = *m.find_action("east");
    auto union_post = [&](const BeliefSupport& u) {
        BeliefSupport out = m.empty_support();
        for (ObservationId o = 0; o < m.num_observations(); ++o) out |= support_post(m, u, east, o);
        return out;
    };
    CHECK(union_post(support_of(m, {"g12", "g13"})) == support_of(m, {"g13", "g14", "g15"}));

    // Oracle: successor entries of the generated rows.
    const auto g11 = *m.find_state("g11");
    BeliefSupport succ = m.empty_support();
    for (const auto& e : m.transitions(g11, east))
        if (e.prob > 0) succ.insert(e.id);
    CHECK(succ == support_of(m, {"g12", "g13"}));
    CHECK(union_post(support_of(m, {"g11"})) == succ);
    CHECK(m.transition_prob(g11, east, *m.find_state("g12")) == doctest::Approx(0.8));
    CHECK(m.transition_prob(g11, east, *m.find_state("g13")) == doctest::Approx(0.2));

    const auto branches = support_post_all(m, support_of(m, {"g11"}), east);
    BeliefSupport all = m.empty_support();
    for (const auto& b : branches) {
        CHECK_FALSE(b.support.empty());
        all |= b.support;
    }
    CHECK(all == succ);
    CHECK(successors(m, support_of(m, {"g11"}), east) == succ);
}

TEST_CASE("impossible observation gives an empty post") {
    const auto m = parse_model(R"(states: 2
actions: 1
observations: 2
T 0 0 1 1
T 1 0 1 1
Z 0 0 0 1
Z 1 0 0 1
init 0 1
reach 1
)");
    CHECK(support_post(m, BeliefSupport(2, {0}), 0, 1).empty());
    const auto branches = support_post_all(m, BeliefSupport(2, {0}), 0);
    REQUIRE(branches.size() == 1);
    CHECK(branches[0].observation == 0);
}

TEST_CASE("absorbing reach state posts to itself under every action") {
    const auto m = generate(fig1_spec());
    const auto goal = m.reach().first();
    const BeliefSupport u(m.num_states(), {goal});
    for (ActionId a = 0; a < m.num_actions(); ++a)
        for (const auto& b : support_post_all(m, u, a)) CHECK(b.support == u);
}

TEST_CASE("support post is monotone and inside the successor set") {
    const auto m = generate(obstacle_spec(5, 3));
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        BeliefSupport u = m.empty_support(), v = m.empty_support();
        for (StateId s = 0; s < m.num_states(); ++s) {
            if (uniform01(rng) < 0.15) u.insert(s);
            if (u.contains(s) || uniform01(rng) < 0.1) v.insert(s);
        }
        if (u.empty()) continue;
        const auto a = static_cast<ActionId>(uniform_index(rng, m.num_actions()));
        const auto succ = successors(m, u, a);
        for (ObservationId o = 0; o < m.num_observations(); ++o) {
            const auto pu = support_post(m, u, a, o);
            CHECK(pu.is_subset_of(succ));
            CHECK(pu.is_subset_of(support_post(m, v, a, o)));
        }
    }
}

TEST_CASE("sampling is deterministic and matches the tables") {
    const auto m = generate(fig1_spec());
    const auto g11 = *m.find_state("g11");
    const auto g13 = *m.find_state("g13");
    const auto east = *m.find_action("east");

    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(sample_step(m, g11, east, a) == sample_step(m, g11, east, b));

    Rng rng(1);
    const int n = 100'000;
    int overshoot = 0;
    std::map<StateId, int> counts;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_next_state(m, g11, east, rng);
        ++counts[s];
        overshoot += s == g13;
    }
    CHECK(std::abs(overshoot / double(n) - 0.2) <= 0.01);

    // Chi-square over the transition row; critical value for alpha = 0.001.
    double chi2 = 0;
    const auto row = m.transitions(g11, east);
    for (const auto& e : row) {
        const double expected = e.prob * n;
        const double d = counts[e.id] - expected;
        chi2 += d * d / expected;
    }
    const double critical[] = {0, 10.83, 13.82, 16.27, 18.47, 20.52};
    REQUIRE(row.size() - 1 < std::size(critical));
    CHECK(chi2 < critical[row.size() - 1]);

    // Observation row of the landing cell.
    std::map<ObservationId, int> obs;
    for (int i = 0; i < n; ++i) ++obs[sample_observation(m, g13, east, rng)];
    chi2 = 0;
    const auto zrow = m.observations(g13, east);
    for (const auto& e : zrow) {
        const double expected = e.prob * n;
        const double d = obs[e.id] - expected;
        chi2 += d * d / expected;
    }
    const double crit_obs[] = {0, 10.83, 13.82, 16.27, 18.47, 20.52, 22.46, 24.32};
    REQUIRE(zrow.size() - 1 < std::size(crit_obs));
    CHECK(chi2 < crit_obs[zrow.size() - 1]);
}

TEST_CASE("Dirac rows give the unique step") {
    const auto m = parse_model(kTwoState);
    Rng rng(3);
    CHECK(sample_step(m, 0, 0, rng) == SimStep{1, 0, -1.0});
}

TEST_CASE("format and lookup helpers") {
    const auto m = generate(fig1_spec());
    const auto u = support_of(m, {"g12", "g13"});
    CHECK(format_support(m, u) == "{g12, g13}");
    CHECK_THROWS(support_of(m, {"nowhere"}));
}
