#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safepomcp/support.hpp"

namespace safepomcp {

/// Row sums must match 1 within this tolerance.
inline constexpr double kProbabilityTolerance = 1e-9;
/// Entries at or below this are ignored when computing supports.
inline constexpr double kSupportEpsilon = 1e-12;

enum class ModelErrorKind {
    Syntax,
    ProbabilitySum,
    DanglingId,
    ReachAvoidOverlap,
    NonAbsorbingReach,
    AvoidInInitial,
    Duplicate,
    Invalid,
};

const char* to_string(ModelErrorKind kind);

class ModelError : public std::runtime_error {
public:
    ModelError(ModelErrorKind kind, std::string message, int line = 0, int column = 0);

    ModelErrorKind kind() const { return kind_; }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    ModelErrorKind kind_;
    int line_;
    int column_;
};

/// Sparse distribution entry: target id (state or observation) and probability.
struct Outcome {
    std::uint32_t id;
    double prob;
    friend bool operator==(const Outcome&, const Outcome&) = default;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits; identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Explicit finite POMDP. Immutable once built; construct through PomdpBuilder
/// or parse_model.
class Pomdp {
public:
    std::size_t num_states() const { return state_names_.size(); }
    std::size_t num_actions() const { return action_names_.size(); }
    std::size_t num_observations() const { return observation_names_.size(); }

    const std::string& state_name(StateId s) const { return state_names_.at(s); }
    const std::string& action_name(ActionId a) const { return action_names_.at(a); }
    const std::string& observation_name(ObservationId o) const { return observation_names_.at(o); }
    std::optional<StateId> find_state(std::string_view name) const;
    std::optional<ActionId> find_action(std::string_view name) const;
    std::optional<ObservationId> find_observation(std::string_view name) const;

    std::span<const Outcome> transitions(StateId s, ActionId a) const {
        const auto row = row_index(s, a);
        return {trans_.data() + trans_offsets_[row], trans_.data() + trans_offsets_[row + 1]};
    }
    std::span<const Outcome> observations(StateId next, ActionId a) const {
        const auto row = row_index(next, a);
        return {obs_.data() + obs_offsets_[row], obs_.data() + obs_offsets_[row + 1]};
    }
    /// Cumulative sums aligned with transitions(s, a) / observations(next, a).
    std::span<const double> transition_cdf(StateId s, ActionId a) const {
        const auto row = row_index(s, a);
        return {trans_cum_.data() + trans_offsets_[row], trans_cum_.data() + trans_offsets_[row + 1]};
    }
    std::span<const double> observation_cdf(StateId next, ActionId a) const {
        const auto row = row_index(next, a);
        return {obs_cum_.data() + obs_offsets_[row], obs_cum_.data() + obs_offsets_[row + 1]};
    }
    std::span<const double> initial_cdf() const { return initial_cum_; }
    double transition_prob(StateId s, ActionId a, StateId next) const;
    double observation_prob(StateId next, ActionId a, ObservationId o) const;
    double reward(StateId s, ActionId a) const { return rewards_[row_index(s, a)]; }

    std::span<const Outcome> initial_belief() const { return initial_; }
    BeliefSupport initial_support() const;

    const BeliefSupport& reach() const { return reach_; }
    const BeliefSupport& avoid() const { return avoid_; }

    bool has_partition() const { return !regions_.empty(); }
    /// Empty string when the model carries no partition.
    const std::string& region_label(StateId s) const;
    const std::vector<std::string>& region_labels() const { return regions_; }

    /// Absorbing under every action with zero reward: nothing can change once entered.
    bool is_terminal(StateId s) const { return terminal_[s]; }
    /// max R - min R over all (s, a); at least 1.
    double reward_span() const { return reward_span_; }

    BeliefSupport empty_support() const { return BeliefSupport(num_states()); }

    /// Rewrites applied while building (e.g. reach rows forced absorbing).
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::uint64_t content_hash() const;

    friend bool operator==(const Pomdp& a, const Pomdp& b);

private:
    friend class PomdpBuilder;
    std::size_t row_index(StateId s, ActionId a) const {
        return static_cast<std::size_t>(s) * num_actions() + a;
    }

    std::vector<std::string> state_names_, action_names_, observation_names_;
    std::vector<std::size_t> trans_offsets_, obs_offsets_;
    std::vector<Outcome> trans_, obs_;
    std::vector<double> trans_cum_, obs_cum_;
    std::vector<double> rewards_;
    std::vector<Outcome> initial_;
    std::vector<double> initial_cum_;
    BeliefSupport reach_, avoid_;
    std::vector<std::string> regions_;
    std::vector<bool> terminal_;
    double reward_span_ = 1.0;
    std::vector<std::string> warnings_;
};

enum class ReachPolicy {
    /// Rewrite every reach row into a self-loop and record a warning.
    ForceAbsorbing,
    /// Reject non-absorbing reach states with ModelErrorKind::NonAbsorbingReach.
    Reject,
};

struct BuildOptions {
    ReachPolicy reach_policy = ReachPolicy::ForceAbsorbing;
    /// Projections (submodels) may legitimately have no initial states.
    bool require_initial = true;
};

class PomdpBuilder {
public:
    PomdpBuilder(std::size_t states, std::size_t actions, std::size_t observations);

    PomdpBuilder& state_name(StateId s, std::string name);
    PomdpBuilder& action_name(ActionId a, std::string name);
    PomdpBuilder& observation_name(ObservationId o, std::string name);

    /// `line` is the source line used in error messages (0 when generated).
    PomdpBuilder& transition(StateId s, ActionId a, StateId next, double p, int line = 0);
    PomdpBuilder& observation(StateId next, ActionId a, ObservationId o, double p, int line = 0);
    PomdpBuilder& reward(StateId s, ActionId a, double r, int line = 0);
    PomdpBuilder& initial(StateId s, double p, int line = 0);
    PomdpBuilder& reach(StateId s, int line = 0);
    PomdpBuilder& avoid(StateId s, int line = 0);
    PomdpBuilder& region(StateId s, std::string label, int line = 0);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }
    std::size_t num_observations() const { return num_observations_; }

    Pomdp build(const BuildOptions& options = {}) &&;

private:
    struct Entry {
        std::uint32_t target;
        double prob;
        int line;
    };
    void check_state(StateId s, int line) const;
    void check_action(ActionId a, int line) const;
    void check_observation(ObservationId o, int line) const;
    static void check_prob(double p, int line);

    std::size_t num_states_, num_actions_, num_observations_;
    std::vector<std::string> state_names_, action_names_, observation_names_;
    std::vector<std::vector<Entry>> trans_, obs_;
    std::vector<double> rewards_;
    std::vector<bool> reward_set_;
    std::vector<Entry> initial_;
    std::vector<int> reach_line_, avoid_line_;
    std::vector<std::string> regions_;
    bool any_region_ = false;
};

/// Parses the line-based model format; see README for the grammar.
Pomdp parse_model(std::string_view text, const BuildOptions& options = {});
Pomdp load_model(const std::string& path, const BuildOptions& options = {});
/// Canonical text form: rows sorted by id, probabilities in round-trip precision.
std::string serialize_model(const Pomdp& m);
void save_model(const Pomdp& m, const std::string& path);

/// One observation branch of a support update.
struct SupportBranch {
    ObservationId observation;
    BeliefSupport support;
    friend bool operator==(const SupportBranch&, const SupportBranch&) = default;
};

/// States reachable from u in one step under a (ignoring observations).
BeliefSupport successors(const Pomdp& m, const BeliefSupport& u, ActionId a);
/// Exact support of the Bayes update after (a, o); empty when o is impossible.
BeliefSupport support_post(const Pomdp& m, const BeliefSupport& u, ActionId a, ObservationId o);
/// All non-empty observation branches after a, ordered by observation id.
std::vector<SupportBranch> support_post_all(const Pomdp& m, const BeliefSupport& u, ActionId a);

struct SimStep {
    StateId next_state;
    ObservationId observation;
    double reward;
    friend bool operator==(const SimStep&, const SimStep&) = default;
};

/// Black-box generative step: s' ~ T(s,a,.), o ~ Z(s',a,.), r = R(s,a).
SimStep sample_step(const Pomdp& m, StateId s, ActionId a, Rng& rng);
StateId sample_next_state(const Pomdp& m, StateId s, ActionId a, Rng& rng);
ObservationId sample_observation(const Pomdp& m, StateId next, ActionId a, Rng& rng);
StateId sample_initial_state(const Pomdp& m, Rng& rng);

/// Human-readable "{a, b, c}" using state names.
std::string format_support(const Pomdp& m, const BeliefSupport& u);
/// Parses space-separated state names or ids into a support.
BeliefSupport support_of(const Pomdp& m, std::initializer_list<std::string_view> names);

}  // namespace safepomcp
