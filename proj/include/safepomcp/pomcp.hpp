#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safepomcp/model.hpp"

namespace safepomcp {

enum class RolloutPolicy { Uniform };

struct PlannerConfig {
    std::size_t simulations = 40'000;
    int depth = 200;
    std::size_t particles = 10'000;
    /// UCB exploration constant; defaults to the model's reward span.
    std::optional<double> ucb_c;
    double discount = 1.0;
    RolloutPolicy rollout = RolloutPolicy::Uniform;
    std::uint64_t seed = 0;

    /// 2,000 simulations, 1,000 particles, depth 100.
    static PlannerConfig desk();
    void validate() const;
    double exploration(const Pomdp& m) const { return ucb_c.value_or(m.reward_span()); }
};

struct ActionStats {
    std::uint64_t visits = 0;
    double value = 0.0;
};

/// History node T(h). Per-action statistics live here; children are keyed by
/// (action, observation).
struct TreeNode {
    std::uint64_t visits = 0;
    double value = 0.0;
    std::vector<StateId> particles;
    /// Set of distinct particle states (same universe as the model).
    BeliefSupport particle_support;
    /// Empty until the node is expanded.
    std::vector<ActionStats> actions;
    std::vector<bool> shielded;
    std::map<std::pair<ActionId, ObservationId>, std::unique_ptr<TreeNode>> children;
    /// Exact belief support. Always kept at the root; kept for inner nodes
    /// only during shielded search.
    std::optional<BeliefSupport> exact_support;

    explicit TreeNode(std::size_t num_states = 0) : particle_support(num_states) {}

    bool expanded() const { return !actions.empty(); }
    void expand(std::size_t num_actions);
    void add_particle(StateId s);
    TreeNode* child(ActionId a, ObservationId o);
    const TreeNode* child(ActionId a, ObservationId o) const;
    TreeNode& make_child(ActionId a, ObservationId o);
    /// Marks a as shielded and drops every subtree below it.
    void shield(ActionId a);
    bool is_shielded(ActionId a) const { return a < shielded.size() && shielded[a]; }
    std::size_t unshielded_count(std::size_t num_actions) const;
    /// Number of nodes in the subtree, this one included.
    std::size_t size() const;
};

/// UCB1 over unshielded actions; unvisited actions first, ties to the lowest
/// id. nullopt when every action is shielded (dead node). `node.actions` may
/// be empty (not expanded), in which case `num_actions` decides the range.
std::optional<ActionId> ucb_select(const TreeNode& node, double c, std::size_t num_actions = 0);

struct SearchStats {
    std::size_t simulations = 0;
    /// Actions shielded inside the tree after a failed membership check.
    std::size_t tree_prunes = 0;
    /// Actions shielded because every action below them died.
    std::size_t escalations = 0;
    std::size_t rollout_rejections = 0;
    std::size_t rollout_truncations = 0;
    /// Root choices rejected by the final exact-support check.
    std::size_t root_rejections = 0;
};

/// Hook points for on-the-fly shielding. A null hook means unshielded search.
class SearchShield {
public:
    virtual ~SearchShield() = default;
    /// May the particle set of `child` = T(hao) grow by `next`?
    virtual bool allow_branch(const TreeNode& child, StateId next) = 0;
    /// May a rollout step land in `next`?
    virtual bool allow_rollout_state(StateId next) = 0;
    /// Final guard on the action returned at the root.
    virtual bool allow_root_action(const BeliefSupport& root_support, ActionId a) = 0;
};

class NoSafeAction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class BeliefCollapse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ImpossibleObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlanResult {
    ActionId action;
    SearchStats stats;
};

/// Runs cfg.simulations iterations from `root` and returns the greedy action.
PlanResult plan_step(const Pomdp& m, TreeNode& root, const PlannerConfig& cfg, Rng& rng,
                     SearchShield* shield = nullptr);

/// Root with cfg.particles draws from the initial belief and the exact initial support.
TreeNode initial_root(const Pomdp& m, const PlannerConfig& cfg, Rng& rng);

/// Moves to T(h a o), refilling particles by rejection sampling from the old
/// root and updating the exact support.
TreeNode advance_root(const Pomdp& m, TreeNode&& root, ActionId a, ObservationId o, const PlannerConfig& cfg,
                      Rng& rng);

}  // namespace safepomcp
