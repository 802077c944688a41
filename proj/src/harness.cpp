#include "safepomcp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace safepomcp {

namespace {

using Clock = std::chrono::steady_clock;

Rng stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return Rng(seq);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string format_number(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeMetrics run_episode(std::shared_ptr<const Pomdp> m, const RegionHandle& regions, ShieldMode mode,
                           const PlannerConfig& cfg, std::uint64_t seed, const EpisodeOptions& options) {
    cfg.validate();
    if (options.step_cap == 0) throw std::invalid_argument("step cap must be at least 1");
    const Pomdp& model = *m;
    std::unique_ptr<ShieldContext> ctx;
    if (is_factored(mode)) {
        if (!regions.factored) throw std::invalid_argument(std::string(to_string(mode)) + " needs a factored region");
        ctx = std::make_unique<ShieldContext>(mode, m, regions.factored);
    } else if (is_shielded(mode)) {
        if (!regions.central) throw std::invalid_argument(std::string(to_string(mode)) + " needs a centralized region");
        ctx = std::make_unique<ShieldContext>(mode, m, regions.central);
    }

    Rng env = stream(seed, 1);
    Rng planner_rng = stream(seed, 2);
    EpisodeMetrics out;
    out.seed = seed;

    TreeNode root = initial_root(model, cfg, planner_rng);
    if (ctx && !ctx->contains(*root.exact_support))
        throw UnwinningStart("initial support " + format_support(model, *root.exact_support) +
                             " is not in the " + to_string(mode) + " region");
    StateId state = sample_initial_state(model, env);

    auto assert_safe = [&](const char* what) {
        // Uncounted: the assertion is harness bookkeeping, not shield work.
        const auto saved = ctx->stats;
        const bool ok = ctx->contains(*root.exact_support);
        ctx->stats = saved;
        if (!ok || model.avoid().contains(state))
            throw SafetyViolation(std::string(what) + ": state " + model.state_name(state) + ", support " +
                                  format_support(model, *root.exact_support));
    };

    while (out.steps < options.step_cap) {
        if (model.reach().contains(state)) break;
        if (model.is_terminal(state)) break;

        const auto t0 = Clock::now();
        if (ctx && !is_on_the_fly(mode)) prior_prune(*ctx, root);
        const auto result = plan_step(model, root, cfg, planner_rng, ctx && is_on_the_fly(mode) ? ctx.get() : nullptr);
        const double elapsed = seconds_since(t0);
        out.step_times_s.push_back(options.record_timing ? elapsed : 0.0);
        out.search.simulations += result.stats.simulations;
        out.search.tree_prunes += result.stats.tree_prunes;
        out.search.escalations += result.stats.escalations;
        out.search.rollout_rejections += result.stats.rollout_rejections;
        out.search.rollout_truncations += result.stats.rollout_truncations;
        out.search.root_rejections += result.stats.root_rejections;

        const ActionId a = result.action;
        const auto step = sample_step(model, state, a, env);
        out.ret += step.reward;
        ++out.steps;
        state = step.next_state;
        if (model.avoid().contains(state)) ++out.unsafe;

        try {
            root = advance_root(model, std::move(root), a, step.observation, cfg, planner_rng);
        } catch (const BeliefCollapse&) {
            out.collapsed = true;
        }
        if (options.trace) {
            *options.trace << "step " << out.steps << " action " << model.action_name(a) << " observation "
                           << model.observation_name(step.observation) << " reward " << format_number(step.reward)
                           << " state " << model.state_name(state) << " support "
                           << format_support(model, *root.exact_support) << '\n';
        }
        if (ctx) assert_safe("shielded episode left the winning region");
        if (out.collapsed) break;
    }
    out.reached = model.reach().contains(state);
    if (!out.step_times_s.empty()) {
        out.step_time_mean_s = std::accumulate(out.step_times_s.begin(), out.step_times_s.end(), 0.0) /
                               static_cast<double>(out.step_times_s.size());
        out.step_time_median_s = median(out.step_times_s);
    }
    if (ctx) out.shield = ctx->stats;
    return out;
}

// ---------------------------------------------------------------------------
// Regions

namespace {

std::string cache_file(const std::string& dir, const Pomdp& m, const char* family) {
    return (std::filesystem::path(dir) /
            (hex64(m.content_hash()) + "-" + hex64(Spec::from_model(m).hash()) + "-" + family + ".region"))
        .string();
}

RegionOptions with_timeout(double timeout_s) {
    RegionOptions o;
    if (timeout_s > 0)
        o.deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
    return o;
}

}  // namespace

std::shared_ptr<const WinningRegion> obtain_central_region(std::shared_ptr<const Pomdp> m,
                                                           const std::string& cache_dir, double timeout_s,
                                                           double* seconds) {
    if (seconds) *seconds = 0.0;
    const auto path = cache_dir.empty() ? std::string() : cache_file(cache_dir, *m, "central");
    if (!path.empty() && std::filesystem::exists(path))
        return std::make_shared<const WinningRegion>(load_region(path, m));
    const auto t0 = Clock::now();
    auto w = std::make_shared<const WinningRegion>(compute_winning_region(m, with_timeout(timeout_s)));
    if (seconds) *seconds = seconds_since(t0);
    if (!path.empty()) {
        std::filesystem::create_directories(cache_dir);
        save_region(*w, path);
    }
    return w;
}

std::shared_ptr<const FactoredRegion> obtain_factored_region(std::shared_ptr<const Pomdp> m,
                                                             const std::string& cache_dir, double timeout_s,
                                                             double* seconds) {
    if (seconds) *seconds = 0.0;
    const auto path = cache_dir.empty() ? std::string() : cache_file(cache_dir, *m, "factored");
    if (!path.empty() && std::filesystem::exists(path))
        return std::make_shared<const FactoredRegion>(load_factored_region(path, m));
    const auto t0 = Clock::now();
    FactoredOptions opts;
    opts.region = with_timeout(timeout_s);
    auto f = std::make_shared<const FactoredRegion>(compute_factored_region(m, opts));
    if (seconds) *seconds = seconds_since(t0);
    if (!path.empty()) {
        std::filesystem::create_directories(cache_dir);
        save_factored_region(*f, path);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
    if (domains.empty()) throw std::invalid_argument("experiment needs at least one domain");
    if (modes.empty()) throw std::invalid_argument("experiment needs at least one mode");
    if (episodes == 0) throw std::invalid_argument("episodes must be at least 1");
    if (step_cap == 0) throw std::invalid_argument("step cap must be at least 1");
    if (threads == 0) throw std::invalid_argument("threads must be at least 1");
    for (const auto& d : domains)
        if (!d.grid && d.model_path.empty()) throw std::invalid_argument("domain " + d.name + " has no source");
    planner.validate();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    using nlohmann::json;
    const json j = json::parse(text);
    static const std::set<std::string> known{"domains", "modes", "planner", "profile", "episodes", "seed",
                                             "step_cap", "region_cache", "region_timeout_s", "output", "table",
                                             "record_timing", "threads"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw std::invalid_argument("unknown experiment key: " + it.key());

    ExperimentConfig cfg;
    const auto profile = j.value("profile", std::string("desk"));
    if (profile == "full") cfg.planner = PlannerConfig{};
    else if (profile != "desk") throw std::invalid_argument("profile must be desk or full");
    if (j.contains("planner")) {
        const auto& p = j["planner"];
        static const std::set<std::string> pk{"simulations", "particles", "depth", "ucb_c", "discount"};
        for (auto it = p.begin(); it != p.end(); ++it)
            if (!pk.count(it.key())) throw std::invalid_argument("unknown planner key: " + it.key());
        if (p.contains("simulations")) cfg.planner.simulations = p["simulations"].get<std::size_t>();
        if (p.contains("particles")) cfg.planner.particles = p["particles"].get<std::size_t>();
        if (p.contains("depth")) cfg.planner.depth = p["depth"].get<int>();
        if (p.contains("ucb_c")) cfg.planner.ucb_c = p["ucb_c"].get<double>();
        if (p.contains("discount")) cfg.planner.discount = p["discount"].get<double>();
    }
    for (const auto& d : j.at("domains")) {
        DomainSource src;
        if (d.contains("model")) {
            src.model_path = d["model"].get<std::string>();
            src.name = d.value("name", std::filesystem::path(src.model_path).stem().string());
        } else {
            src.grid = grid_spec_from_json(d.at("grid").dump());
            src.name = d.value("name", std::string(to_string(src.grid->family)));
        }
        cfg.domains.push_back(std::move(src));
    }
    for (const auto& m : j.at("modes")) {
        const auto name = m.get<std::string>();
        auto mode = parse_shield_mode(name);
        if (!mode) throw std::invalid_argument("unknown shield mode: " + name);
        cfg.modes.push_back(*mode);
    }
    cfg.episodes = j.value("episodes", cfg.episodes);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.step_cap = j.value("step_cap", cfg.step_cap);
    cfg.region_cache = j.value("region_cache", cfg.region_cache);
    cfg.region_timeout_s = j.value("region_timeout_s", cfg.region_timeout_s);
    cfg.output = j.value("output", cfg.output);
    cfg.table = j.value("table", cfg.table);
    cfg.record_timing = j.value("record_timing", cfg.record_timing);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.validate();
    return cfg;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    for (const auto& domain : cfg.domains) {
        auto m = std::make_shared<const Pomdp>(domain.grid ? generate(*domain.grid) : load_model(domain.model_path));
        const auto params = domain.grid ? grid_params(*domain.grid) : std::to_string(m->num_states());

        RegionHandle regions;
        double central_s = 0, factored_s = 0;
        bool central_timeout = false, factored_timeout = false;
        const bool need_central = std::any_of(cfg.modes.begin(), cfg.modes.end(),
                                              [](auto md) { return is_shielded(md) && !is_factored(md); });
        const bool need_factored = std::any_of(cfg.modes.begin(), cfg.modes.end(), is_factored);
        if (need_central) {
            try {
                regions.central = obtain_central_region(m, cfg.region_cache, cfg.region_timeout_s, &central_s);
            } catch (const RegionTimeout&) {
                central_timeout = true;
            } catch (const GraphCapExceeded&) {
                central_timeout = true;
            }
        }
        if (need_factored) {
            try {
                regions.factored = obtain_factored_region(m, cfg.region_cache, cfg.region_timeout_s, &factored_s);
            } catch (const RegionTimeout&) {
                factored_timeout = true;
            }
        }

        for (auto mode : cfg.modes) {
            CellSummary cell{domain.name, params, mode};
            cell.episodes = cfg.episodes;
            cell.timed_out = is_factored(mode) ? factored_timeout : (is_shielded(mode) && central_timeout);
            cell.region_time_s = !is_shielded(mode) ? 0.0 : is_factored(mode) ? factored_s : central_s;
            std::vector<EpisodeRow> rows(cfg.episodes);
            for (std::size_t e = 0; e < cfg.episodes; ++e)
                rows[e] = EpisodeRow{domain.name, params, mode, std::nullopt, cfg.seed + e};
            if (!cell.timed_out) {
                EpisodeOptions opts;
                opts.step_cap = cfg.step_cap;
                opts.record_timing = cfg.record_timing;
                std::atomic<std::size_t> next{0};
                std::exception_ptr failure;
                std::mutex failure_mutex;
                auto worker = [&] {
                    for (std::size_t e; (e = next++) < cfg.episodes;) {
                        try {
                            rows[e].metrics = run_episode(m, regions, mode, cfg.planner, rows[e].seed, opts);
                        } catch (...) {
                            std::lock_guard lock(failure_mutex);
                            if (!failure) failure = std::current_exception();
                        }
                    }
                };
                const auto n = std::min(cfg.threads, cfg.episodes);
                if (n <= 1) {
                    worker();
                } else {
                    std::vector<std::jthread> pool;
                    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
                }
                if (failure) std::rethrow_exception(failure);

                std::vector<double> returns;
                for (const auto& r : rows) {
                    const auto& x = *r.metrics;
                    cell.steps += static_cast<double>(x.steps);
                    cell.ret += x.ret;
                    cell.unsafe += static_cast<double>(x.unsafe);
                    cell.reached += x.reached ? 1.0 : 0.0;
                    cell.step_time_mean_s += x.step_time_mean_s;
                    cell.step_time_median_s += x.step_time_median_s;
                    returns.push_back(x.ret);
                }
                const double n_ep = static_cast<double>(cfg.episodes);
                cell.steps /= n_ep;
                cell.ret /= n_ep;
                cell.unsafe /= n_ep;
                cell.reached /= n_ep;
                cell.step_time_mean_s /= n_ep;
                cell.step_time_median_s /= n_ep;
                if (returns.size() > 1) {
                    double var = 0;
                    for (double r : returns) var += (r - cell.ret) * (r - cell.ret);
                    var /= static_cast<double>(returns.size() - 1);
                    cell.ret_stderr = std::sqrt(var / n_ep);
                }
            }
            for (auto& r : rows) report.rows.push_back(std::move(r));
            report.cells.push_back(cell);
        }
    }
    if (!cfg.output.empty()) {
        std::ofstream out(cfg.output);
        if (!out) throw std::runtime_error("cannot write " + cfg.output);
        write_csv(out, report);
    }
    if (!cfg.table.empty()) {
        std::ofstream out(cfg.table);
        if (!out) throw std::runtime_error("cannot write " + cfg.table);
        out << format_table(report);
    }
    return report;
}

void write_csv(std::ostream& out, const ExperimentReport& report) {
    out << "domain,params,mode,seed,steps,return,unsafe,reached,step_time_mean_s,step_time_median_s\n";
    for (const auto& r : report.rows) {
        out << r.domain << ",\"" << r.params << "\"," << to_string(r.mode) << ',' << r.seed << ',';
        if (!r.metrics) {
            out << "-,-,-,-,-,-\n";
            continue;
        }
        const auto& x = *r.metrics;
        out << x.steps << ',' << format_number(x.ret) << ',' << x.unsafe << ',' << (x.reached ? 1 : 0) << ','
            << format_number(x.step_time_mean_s) << ',' << format_number(x.step_time_median_s) << '\n';
    }
}

std::string format_table(const ExperimentReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-8s %-15s %4s %11s %11s %9s %8s %8s %9s\n", "domain", "params", "mode",
                  "eps", "time_med(s)", "return", "ret_se", "unsafe", "reached", "region(s)");
    os << line;
    for (const auto& c : report.cells) {
        if (c.timed_out) {
            std::snprintf(line, sizeof line, "%-12s %-8s %-15s %4zu %11s %11s %9s %8s %8s %9s\n", c.domain.c_str(),
                          c.params.c_str(), to_string(c.mode), c.episodes, "-", "-", "-", "-", "-", "-");
        } else {
            std::snprintf(line, sizeof line, "%-12s %-8s %-15s %4zu %11.4f %11.1f %9.1f %8.2f %8.2f %9.3f\n",
                          c.domain.c_str(), c.params.c_str(), to_string(c.mode), c.episodes, c.step_time_median_s,
                          c.ret, c.ret_stderr, c.unsafe, c.reached, c.region_time_s);
        }
        os << line;
    }
    return os.str();
}

}  // namespace safepomcp
