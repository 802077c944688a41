#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safepomcp/domains.hpp"
#include "safepomcp/factored.hpp"
#include "safepomcp/pomcp.hpp"
#include "safepomcp/shield.hpp"
#include "safepomcp/winreg.hpp"

namespace safepomcp {

/// A shielded episode visited an avoid state or executed an unsafe action.
class SafetyViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnwinningStart : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegionHandle {
    std::shared_ptr<const WinningRegion> central;
    std::shared_ptr<const FactoredRegion> factored;
};

struct EpisodeMetrics {
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    double ret = 0.0;
    std::size_t unsafe = 0;
    bool reached = false;
    bool collapsed = false;
    double step_time_mean_s = 0.0;
    double step_time_median_s = 0.0;
    std::vector<double> step_times_s;
    ShieldStats shield;
    SearchStats search;
};

struct EpisodeOptions {
    std::size_t step_cap = 200;
    /// When false, step times are reported as zero (reproducible reports).
    bool record_timing = true;
    /// Per-step lines: step, action, observation, reward, exact support.
    std::ostream* trace = nullptr;
};

EpisodeMetrics run_episode(std::shared_ptr<const Pomdp> m, const RegionHandle& regions, ShieldMode mode,
                           const PlannerConfig& cfg, std::uint64_t seed, const EpisodeOptions& options = {});

struct DomainSource {
    std::string name;
    std::optional<GridSpec> grid;
    std::string model_path;
};

struct ExperimentConfig {
    std::vector<DomainSource> domains;
    std::vector<ShieldMode> modes;
    PlannerConfig planner = PlannerConfig::desk();
    std::size_t episodes = 10;
    std::uint64_t seed = 1;
    std::size_t step_cap = 200;
    std::string region_cache;
    double region_timeout_s = 3600.0;
    std::string output;
    std::string table;
    bool record_timing = true;
    std::size_t threads = 1;

    void validate() const;
};

/// JSON document; unknown keys are rejected. `profile` is "desk" or "full".
ExperimentConfig experiment_config_from_json(const std::string& text);

struct EpisodeRow {
    std::string domain;
    std::string params;
    ShieldMode mode;
    /// Empty when the region computation timed out.
    std::optional<EpisodeMetrics> metrics;
    std::uint64_t seed = 0;
};

struct CellSummary {
    std::string domain;
    std::string params;
    ShieldMode mode;
    std::size_t episodes = 0;
    bool timed_out = false;
    double steps = 0, ret = 0, ret_stderr = 0, unsafe = 0, reached = 0;
    double step_time_mean_s = 0, step_time_median_s = 0;
    double region_time_s = 0;
};

struct ExperimentReport {
    std::vector<EpisodeRow> rows;
    std::vector<CellSummary> cells;
};

/// Regions for one model, computed or loaded from `cache_dir` (may be empty).
/// Throws RegionTimeout when the deadline passes. `seconds` receives the
/// computation time (0 when loaded from the cache).
std::shared_ptr<const WinningRegion> obtain_central_region(std::shared_ptr<const Pomdp> m,
                                                           const std::string& cache_dir, double timeout_s,
                                                           double* seconds = nullptr);
std::shared_ptr<const FactoredRegion> obtain_factored_region(std::shared_ptr<const Pomdp> m,
                                                             const std::string& cache_dir, double timeout_s,
                                                             double* seconds = nullptr);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

void write_csv(std::ostream& out, const ExperimentReport& report);
std::string format_table(const ExperimentReport& report);
std::string format_number(double x);

}  // namespace safepomcp
