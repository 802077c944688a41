#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "safepomcp/factored.hpp"
#include "safepomcp/pomcp.hpp"
#include "safepomcp/winreg.hpp"

namespace safepomcp {

enum class ShieldMode { NoShield, CentralizedPrior, CentralizedOnTheFly, FactoredPrior, FactoredOnTheFly };

const char* to_string(ShieldMode mode);
std::optional<ShieldMode> parse_shield_mode(std::string_view text);
inline bool is_shielded(ShieldMode m) { return m != ShieldMode::NoShield; }
inline bool is_factored(ShieldMode m) { return m == ShieldMode::FactoredPrior || m == ShieldMode::FactoredOnTheFly; }
inline bool is_on_the_fly(ShieldMode m) {
    return m == ShieldMode::CentralizedOnTheFly || m == ShieldMode::FactoredOnTheFly;
}
inline constexpr ShieldMode kAllModes[] = {ShieldMode::NoShield, ShieldMode::CentralizedPrior,
                                           ShieldMode::CentralizedOnTheFly, ShieldMode::FactoredPrior,
                                           ShieldMode::FactoredOnTheFly};

struct ShieldStats {
    std::size_t root_pruned = 0;
    std::size_t branches_pruned = 0;
    std::size_t membership_queries = 0;
    std::size_t rollout_rejections = 0;
    std::size_t root_rejections = 0;

    ShieldStats& operator+=(const ShieldStats& o);
};

/// Region handle plus counters; implements the planner's search hooks.
class ShieldContext : public SearchShield {
public:
    ShieldContext(ShieldMode mode, std::shared_ptr<const Pomdp> model, std::shared_ptr<const WinningRegion> region);
    ShieldContext(ShieldMode mode, std::shared_ptr<const Pomdp> model, std::shared_ptr<const FactoredRegion> region);

    ShieldMode mode() const { return mode_; }
    const Pomdp& model() const { return *model_; }

    /// Region membership of a support under this mode's region. With
    /// `extend` false a factored region answers from what it has solved so far.
    bool contains(const BeliefSupport& u, bool extend = true);
    /// Every non-empty branch of (u, a) stays in the region.
    bool action_safe(const BeliefSupport& u, ActionId a);
    std::vector<ActionId> allowed(const BeliefSupport& u);

    bool allow_branch(const TreeNode& child, StateId next) override;
    bool allow_rollout_state(StateId next) override;
    bool allow_root_action(const BeliefSupport& root_support, ActionId a) override;

    ShieldStats stats;

private:
    void check_model(const Pomdp& region_model, const Spec& spec) const;

    ShieldMode mode_;
    std::shared_ptr<const Pomdp> model_;
    std::shared_ptr<const WinningRegion> central_;
    std::unique_ptr<FactoredMembership> factored_;
};

/// Shields every root action with a branch outside the region; returns the
/// pruned actions. Needs the root's exact support to be winning.
std::vector<ActionId> prior_prune(ShieldContext& ctx, TreeNode& root);

enum class Verdict { Allow, Prune };

/// On-the-fly check of beta(hao) grown by s' for child = T(hao). When the
/// child's exact support is known and winning the particle set is accepted by
/// downward closure without a query of its own.
Verdict backtrack_check(ShieldContext& ctx, const TreeNode& child, StateId s_new);

}  // namespace safepomcp
