// safepomcp command-line tool: generate, region, plan, bench, check.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "safepomcp/harness.hpp"

using namespace safepomcp;

namespace {

enum Exit { Ok = 0, Failure = 1, Validation = 2, Timeout = 3, Safety = 4 };

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_factored_file(const std::string& path) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    return first.find("factored") != std::string::npos;
}

struct PlannerFlags {
    std::string profile = "desk";
    std::optional<std::size_t> simulations, particles;
    std::optional<int> depth;
    std::optional<double> ucb_c, discount;

    void add(CLI::App* app) {
        app->add_option("--profile", profile, "desk (2000 sims) or full (40000 sims)")
            ->check(CLI::IsMember({"desk", "full"}));
        app->add_option("--simulations", simulations, "simulations per step");
        app->add_option("--particles", particles, "particles per belief");
        app->add_option("--depth", depth, "simulation depth");
        app->add_option("--ucb-c", ucb_c, "UCB exploration constant (default: reward span)");
        app->add_option("--discount", discount, "discount factor in (0, 1]");
    }
    PlannerConfig config() const {
        PlannerConfig cfg = profile == "full" ? PlannerConfig{} : PlannerConfig::desk();
        if (simulations) cfg.simulations = *simulations;
        if (particles) cfg.particles = *particles;
        if (depth) cfg.depth = *depth;
        if (ucb_c) cfg.ucb_c = *ucb_c;
        if (discount) cfg.discount = *discount;
        cfg.validate();
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Shielded POMCP planning with almost-sure reach-avoid winning regions"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a benchmark model and its layout preview");
    std::string gen_family = "obstacle", gen_preset, gen_config, gen_out, gen_preview;
    int gen_size = 6, gen_battery = 8, gen_rocks = 3;
    std::uint64_t gen_seed = 1;
    gen->add_option("--family", gen_family, "obstacle | refuel | rocksample")
        ->check(CLI::IsMember({"obstacle", "refuel", "rocksample"}));
    gen->add_option("--preset", gen_preset, "fig1 | fig2 | tiny")->check(CLI::IsMember({"fig1", "fig2", "tiny"}));
    gen->add_option("--config", gen_config, "grid spec JSON file");
    gen->add_option("--size", gen_size, "grid side N");
    gen->add_option("--battery", gen_battery, "refuel battery capacity");
    gen->add_option("--rocks", gen_rocks, "rocksample rock count");
    gen->add_option("--seed", gen_seed, "placement seed");
    gen->add_option("-o,--output", gen_out, "model file")->required();
    gen->add_option("--preview", gen_preview, "layout preview file (default: stdout)");

    // region
    auto* reg = app.add_subcommand("region", "compute a winning region for a model");
    std::string reg_model, reg_out;
    bool reg_factored = false;
    double reg_timeout = 3600;
    std::size_t reg_cap = 5'000'000;
    reg->add_option("model", reg_model, "model file")->required();
    reg->add_option("-o,--output", reg_out, "region file")->required();
    reg->add_flag("--factored", reg_factored, "decompose by region labels and propagate");
    reg->add_option("--timeout", reg_timeout, "seconds before giving up");
    reg->add_option("--max-vertices", reg_cap, "support graph size cap");

    // plan
    auto* plan = app.add_subcommand("plan", "run one episode");
    std::string plan_model, plan_mode = "none", plan_region;
    std::uint64_t plan_seed = 1;
    std::size_t plan_cap = 200;
    bool plan_trace = false;
    PlannerFlags plan_flags;
    plan->add_option("model", plan_model, "model file")->required();
    plan->add_option("--mode", plan_mode, "none | central-prior | central-otf | factored-prior | factored-otf");
    plan->add_option("--region", plan_region, "precomputed region file (computed on the fly otherwise)");
    plan->add_option("--seed", plan_seed, "episode seed");
    plan->add_option("--cap", plan_cap, "step cap");
    plan->add_flag("--trace", plan_trace, "print one line per step");
    plan_flags.add(plan);

    // bench
    auto* bench = app.add_subcommand("bench", "run an experiment and write the CSV and table");
    std::string bench_config, bench_out, bench_table, bench_profile;
    std::optional<std::size_t> bench_threads;
    bench->add_option("config", bench_config, "experiment JSON file")->required();
    bench->add_option("-o,--output", bench_out, "CSV path (overrides the config)");
    bench->add_option("--table", bench_table, "table path (overrides the config)");
    bench->add_option("--profile", bench_profile, "desk | full (overrides the config)")
        ->check(CLI::IsMember({"desk", "full"}));
    bench->add_option("--threads", bench_threads, "concurrent episodes");

    // check
    auto* check = app.add_subcommand("check", "verify a region file against a model");
    std::string check_model, check_region;
    check->add_option("model", check_model, "model file")->required();
    check->add_option("region", check_region, "region file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : Validation;
    }

    if (*gen) {
        GridSpec spec;
        if (!gen_config.empty()) {
            spec = grid_spec_from_json(read_file(gen_config));
        } else if (!gen_preset.empty()) {
            spec = gen_preset == "fig1" ? fig1_spec() : gen_preset == "fig2" ? fig2_spec() : tiny_spec();
        } else if (gen_family == "obstacle") {
            spec = obstacle_spec(gen_size, gen_seed);
        } else if (gen_family == "refuel") {
            spec = refuel_spec(gen_size, gen_battery, gen_seed);
        } else {
            spec = rocksample_spec(gen_size, gen_rocks, gen_seed);
        }
        const auto m = generate(spec);
        save_model(m, gen_out);
        const auto preview = layout_preview(spec);
        if (gen_preview.empty()) {
            std::cout << preview;
        } else {
            std::ofstream(gen_preview) << preview;
        }
        std::cerr << gen_out << ": " << m.num_states() << " states, " << m.num_actions() << " actions, "
                  << m.num_observations() << " observations\n";
        return Ok;
    }

    if (*reg) {
        auto m = std::make_shared<const Pomdp>(load_model(reg_model));
        RegionOptions opts;
        opts.max_vertices = reg_cap;
        opts.deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(reg_timeout));
        if (reg_factored) {
            FactoredOptions fopts;
            fopts.region = opts;
            const auto f = compute_factored_region(m, fopts);
            save_factored_region(f, reg_out);
            std::size_t elements = 0;
            for (std::size_t i = 0; i < f.submodels().size(); ++i) elements += f.region(i).antichain().size();
            std::cerr << reg_out << ": " << f.submodels().size() << " submodels, " << elements
                      << " antichain elements, initial support "
                      << (f.union_contains(m->initial_support()) ? "winning" : "NOT winning") << '\n';
        } else {
            const auto w = compute_winning_region(m, opts);
            save_region(w, reg_out);
            std::cerr << reg_out << ": " << w.antichain().size() << " antichain elements, initial support "
                      << (w.contains(m->initial_support()) ? "winning" : "NOT winning") << '\n';
        }
        return Ok;
    }

    if (*plan) {
        auto mode = parse_shield_mode(plan_mode);
        if (!mode) throw std::invalid_argument("unknown mode " + plan_mode);
        auto m = std::make_shared<const Pomdp>(load_model(plan_model));
        RegionHandle regions;
        if (is_factored(*mode)) {
            regions.factored = plan_region.empty()
                                   ? obtain_factored_region(m, "", 3600)
                                   : std::make_shared<const FactoredRegion>(load_factored_region(plan_region, m));
        } else if (is_shielded(*mode)) {
            regions.central = plan_region.empty() ? obtain_central_region(m, "", 3600)
                                                  : std::make_shared<const WinningRegion>(load_region(plan_region, m));
        }
        EpisodeOptions opts;
        opts.step_cap = plan_cap;
        if (plan_trace) opts.trace = &std::cout;
        const auto x = run_episode(m, regions, *mode, plan_flags.config(), plan_seed, opts);
        std::cout << "steps " << x.steps << " return " << format_number(x.ret) << " unsafe " << x.unsafe
                  << " reached " << (x.reached ? 1 : 0) << " step_time_mean_s " << format_number(x.step_time_mean_s)
                  << " step_time_median_s " << format_number(x.step_time_median_s) << " root_pruned "
                  << x.shield.root_pruned << " branches_pruned " << x.shield.branches_pruned
                  << " membership_queries " << x.shield.membership_queries << '\n';
        return Ok;
    }

    if (*bench) {
        auto cfg = experiment_config_from_json(read_file(bench_config));
        if (!bench_out.empty()) cfg.output = bench_out;
        if (!bench_table.empty()) cfg.table = bench_table;
        if (bench_threads) cfg.threads = *bench_threads;
        if (bench_profile == "full") {
            const PlannerConfig full;
            cfg.planner.simulations = full.simulations;
            cfg.planner.particles = full.particles;
            cfg.planner.depth = full.depth;
        }
        cfg.validate();
        const auto report = run_experiment(cfg);
        if (cfg.output.empty()) write_csv(std::cout, report);
        std::cout << format_table(report);
        return Ok;
    }

    if (*check) {
        auto m = std::make_shared<const Pomdp>(load_model(check_model));
        std::vector<std::string> problems;
        if (is_factored_file(check_region)) {
            const auto f = load_factored_region(check_region, m);
            for (std::size_t i = 0; i < f.submodels().size(); ++i)
                for (auto& p : verify_region(f.region(i))) problems.push_back(f.submodels()[i].label + ": " + p);
        } else {
            problems = verify_region(load_region(check_region, m));
        }
        for (const auto& p : problems) std::cout << "FAIL " << p << '\n';
        if (!problems.empty()) return Safety;
        std::cout << "ok\n";
        return Ok;
    }
    return Ok;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const SafetyViolation& e) {
        std::cerr << "safety assertion failed: " << e.what() << '\n';
        return Safety;
    } catch (const RegionTimeout& e) {
        std::cerr << e.what() << '\n';
        return Timeout;
    } catch (const GraphCapExceeded& e) {
        std::cerr << e.what() << '\n';
        return Timeout;
    } catch (const ModelError& e) {
        std::cerr << e.what() << '\n';
        return Validation;
    } catch (const UnwinningStart& e) {
        std::cerr << e.what() << '\n';
        return Validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << '\n';
        return Validation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config: " << e.what() << '\n';
        return Validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Failure;
    }
}
