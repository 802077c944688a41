#include <doctest.h>

#include <cmath>
#include <sstream>

#include "safepomcp/harness.hpp"

using namespace safepomcp;

namespace {

PlannerConfig quick() {
    PlannerConfig cfg = PlannerConfig::desk();
    cfg.simulations = 300;
    cfg.particles = 200;
    cfg.depth = 40;
    return cfg;
}

ExperimentConfig small_experiment() {
    ExperimentConfig cfg;
    cfg.domains = {DomainSource{"obstacle", obstacle_spec(5, 2), ""}};
    cfg.modes = {ShieldMode::NoShield, ShieldMode::CentralizedPrior, ShieldMode::FactoredOnTheFly};
    cfg.planner = quick();
    cfg.episodes = 3;
    cfg.seed = 11;
    cfg.step_cap = 60;
    cfg.record_timing = false;
    return cfg;
}

}  // namespace

TEST_CASE("an episode starting at the goal takes no steps") {
    const auto m = std::make_shared<const Pomdp>(
        parse_model("states: 1\nactions: 1\nobservations: 1\nT 0 0 0 1\nZ 0 0 0 1\ninit 0 1\nreach 0\n"));
    const auto region = std::make_shared<const WinningRegion>(compute_winning_region(m));
    for (auto mode : {ShieldMode::NoShield, ShieldMode::CentralizedPrior, ShieldMode::CentralizedOnTheFly}) {
        const auto r = run_episode(m, {region, nullptr}, mode, quick(), 1);
        CHECK(r.steps == 0);
        CHECK(r.ret == 0.0);
        CHECK(r.reached);
        CHECK(r.unsafe == 0);
    }
}

TEST_CASE("shielded episodes never leave the region") {
    const auto m = std::make_shared<const Pomdp>(generate(fig1_spec()));
    RegionHandle regions{std::make_shared<const WinningRegion>(compute_winning_region(m)),
                         std::make_shared<const FactoredRegion>(compute_factored_region(m))};
    for (auto mode : kAllModes) {
        if (!is_shielded(mode)) continue;
        CAPTURE(to_string(mode));
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            std::ostringstream trace;
            EpisodeOptions opts;
            opts.step_cap = 80;
            opts.trace = &trace;
            const auto r = run_episode(m, regions, mode, quick(), seed, opts);
            CHECK(r.unsafe == 0);
            CHECK(r.step_times_s.size() == r.steps);
            std::size_t lines = 0;
            for (char c : trace.str()) lines += c == '\n';
            CHECK(lines == r.steps);
        }
    }
}

TEST_CASE("a shielded mode without its region is rejected") {
    const auto m = std::make_shared<const Pomdp>(generate(fig1_spec()));
    CHECK_THROWS_AS(run_episode(m, {}, ShieldMode::CentralizedPrior, quick(), 1), std::invalid_argument);
    CHECK_THROWS_AS(run_episode(m, {}, ShieldMode::FactoredPrior, quick(), 1), std::invalid_argument);
}

TEST_CASE("reports are reproducible without timing") {
    const auto cfg = small_experiment();
    auto csv = [&](std::size_t threads) {
        auto c = cfg;
        c.threads = threads;
        std::ostringstream out;
        write_csv(out, run_experiment(c));
        return out.str();
    };
    const auto a = csv(1);
    CHECK(a == csv(1));
    CHECK(a == csv(2));
    CHECK(a.rfind("domain,params,mode,seed,steps,return,unsafe,reached,step_time_mean_s,step_time_median_s\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : a) lines += c == '\n';
    CHECK(lines == 1 + cfg.modes.size() * cfg.episodes);
}

TEST_CASE("cell summaries are the episode means") {
    const auto cfg = small_experiment();
    const auto report = run_experiment(cfg);
    REQUIRE(report.cells.size() == cfg.modes.size());
    for (const auto& cell : report.cells) {
        std::vector<double> returns;
        double steps = 0, unsafe = 0, reached = 0;
        for (const auto& row : report.rows) {
            if (row.mode != cell.mode) continue;
            REQUIRE(row.metrics);
            returns.push_back(row.metrics->ret);
            steps += static_cast<double>(row.metrics->steps);
            unsafe += static_cast<double>(row.metrics->unsafe);
            reached += row.metrics->reached;
        }
        const auto n = static_cast<double>(returns.size());
        REQUIRE(n == cell.episodes);
        double mean = 0;
        for (double r : returns) mean += r / n;
        double var = 0;
        for (double r : returns) var += (r - mean) * (r - mean) / (n - 1);
        CHECK(cell.ret == doctest::Approx(mean));
        CHECK(cell.ret_stderr == doctest::Approx(std::sqrt(var / n)));
        CHECK(cell.steps == doctest::Approx(steps / n));
        CHECK(cell.unsafe == doctest::Approx(unsafe / n));
        CHECK(cell.reached == doctest::Approx(reached / n));
        if (is_shielded(cell.mode)) CHECK(cell.unsafe == 0.0);
    }
    CHECK_FALSE(format_table(report).empty());
}

TEST_CASE("experiment validation") {
    auto cfg = small_experiment();
    cfg.episodes = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_experiment();
    cfg.modes.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_experiment();
    cfg.domains.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("experiment JSON") {
    const auto cfg = experiment_config_from_json(R"({
        "domains": [{"grid": {"preset": "fig1"}}],
        "modes": ["none", "factored-otf"],
        "episodes": 4, "seed": 9, "planner": {"simulations": 50}})");
    CHECK(cfg.domains.size() == 1);
    CHECK(cfg.modes == std::vector<ShieldMode>{ShieldMode::NoShield, ShieldMode::FactoredOnTheFly});
    CHECK(cfg.episodes == 4);
    CHECK(cfg.planner.simulations == 50);
    CHECK(cfg.planner.particles == PlannerConfig::desk().particles);

    CHECK_THROWS_AS(experiment_config_from_json(R"({"domains": [{"grid": {"preset": "fig1"}}], "modes": ["none"],
        "episode": 3})"), std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_json(R"({"domains": [{"grid": {"preset": "fig1"}}], "modes": ["none"],
        "episodes": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_json(R"({"domains": [{"grid": {"preset": "fig1"}}], "modes": ["always"]})"),
                    std::invalid_argument);
}

TEST_CASE("number formatting round trips") {
    for (double x : {0.0, 1.0, -5.0, 978.9, 1.0 / 3.0}) CHECK(std::stod(format_number(x)) == x);
}
