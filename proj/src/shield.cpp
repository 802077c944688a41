#include "safepomcp/shield.hpp"

#include <stdexcept>

namespace safepomcp {

const char* to_string(ShieldMode mode) {
    switch (mode) {
        case ShieldMode::NoShield: return "none";
        case ShieldMode::CentralizedPrior: return "central-prior";
        case ShieldMode::CentralizedOnTheFly: return "central-otf";
        case ShieldMode::FactoredPrior: return "factored-prior";
        case ShieldMode::FactoredOnTheFly: return "factored-otf";
    }
    return "?";
}

std::optional<ShieldMode> parse_shield_mode(std::string_view text) {
    for (auto m : kAllModes)
        if (text == to_string(m)) return m;
    return std::nullopt;
}

ShieldStats& ShieldStats::operator+=(const ShieldStats& o) {
    root_pruned += o.root_pruned;
    branches_pruned += o.branches_pruned;
    membership_queries += o.membership_queries;
    rollout_rejections += o.rollout_rejections;
    root_rejections += o.root_rejections;
    return *this;
}

ShieldContext::ShieldContext(ShieldMode mode, std::shared_ptr<const Pomdp> model,
                             std::shared_ptr<const WinningRegion> region)
    : mode_(mode), model_(std::move(model)), central_(std::move(region)) {
    if (!is_shielded(mode) || is_factored(mode)) throw std::invalid_argument("centralized region needs a centralized mode");
    check_model(central_->model(), central_->spec());
}

ShieldContext::ShieldContext(ShieldMode mode, std::shared_ptr<const Pomdp> model,
                             std::shared_ptr<const FactoredRegion> region)
    : mode_(mode), model_(std::move(model)) {
    if (!is_factored(mode)) throw std::invalid_argument("factored region needs a factored mode");
    check_model(region->model(), region->spec());
    factored_ = std::make_unique<FactoredMembership>(std::move(region));
}

void ShieldContext::check_model(const Pomdp& region_model, const Spec& spec) const {
    if (region_model.content_hash() != model_->content_hash())
        throw std::invalid_argument("shield region was computed for a different model");
    if (!(spec == Spec::from_model(*model_)))
        throw std::invalid_argument("shield region was computed for a different specification");
}

bool ShieldContext::contains(const BeliefSupport& u, bool extend) {
    ++stats.membership_queries;
    return central_ ? central_->contains(u) : factored_->contains(u, extend);
}

bool ShieldContext::action_safe(const BeliefSupport& u, ActionId a) {
    for (const auto& branch : support_post_all(*model_, u, a))
        if (!contains(branch.support)) return false;
    return true;
}

std::vector<ActionId> ShieldContext::allowed(const BeliefSupport& u) {
    std::vector<ActionId> out;
    for (ActionId a = 0; a < model_->num_actions(); ++a)
        if (action_safe(u, a)) out.push_back(a);
    return out;
}

bool ShieldContext::allow_branch(const TreeNode& child, StateId next) {
    const bool ok = backtrack_check(*this, child, next) == Verdict::Allow;
    if (!ok) ++stats.branches_pruned;
    return ok;
}

bool ShieldContext::allow_rollout_state(StateId next) {
    ++stats.membership_queries;
    const bool ok = central_ ? central_->contains_state(next)
                             : factored_->contains(BeliefSupport(model_->num_states(), {next}));
    if (!ok) ++stats.rollout_rejections;
    return ok;
}

bool ShieldContext::allow_root_action(const BeliefSupport& root_support, ActionId a) {
    const bool ok = action_safe(root_support, a);
    if (!ok) ++stats.root_rejections;
    return ok;
}

std::vector<ActionId> prior_prune(ShieldContext& ctx, TreeNode& root) {
    if (!root.exact_support) throw std::invalid_argument("prior pruning needs the root's exact support");
    const auto& u = *root.exact_support;
    if (!ctx.contains(u))
        throw ShieldContractError("root support " + format_support(ctx.model(), u) + " is not winning");
    std::vector<ActionId> pruned;
    const auto A = ctx.model().num_actions();
    for (ActionId a = 0; a < A; ++a) {
        if (root.is_shielded(a) || ctx.action_safe(u, a)) continue;
        root.shield(a);
        pruned.push_back(a);
        ++ctx.stats.root_pruned;
    }
    if (root.unshielded_count(A) == 0)
        throw std::logic_error("winning support " + format_support(ctx.model(), u) + " has no allowed action");
    return pruned;
}

Verdict backtrack_check(ShieldContext& ctx, const TreeNode& child, StateId s_new) {
    // Membership held when the particle set last grew; nothing new to check.
    if (child.particle_support.contains(s_new)) return Verdict::Allow;
    if (child.exact_support && child.exact_support->contains(s_new) && ctx.contains(*child.exact_support))
        return Verdict::Allow;
    BeliefSupport u = child.particle_support;
    u.insert(s_new);
    return ctx.contains(u, false) ? Verdict::Allow : Verdict::Prune;
}

}  // namespace safepomcp
