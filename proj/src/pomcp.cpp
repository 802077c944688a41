#include "safepomcp/pomcp.hpp"

#include <cmath>
#include <limits>

namespace safepomcp {

PlannerConfig PlannerConfig::desk() {
    PlannerConfig cfg;
    cfg.simulations = 2'000;
    cfg.particles = 1'000;
    cfg.depth = 100;
    return cfg;
}

void PlannerConfig::validate() const {
    if (simulations == 0) throw std::invalid_argument("simulations must be positive");
    if (depth <= 0) throw std::invalid_argument("depth must be positive");
    if (particles == 0) throw std::invalid_argument("particles must be positive");
    if (ucb_c && !(*ucb_c >= 0.0)) throw std::invalid_argument("ucb constant must be non-negative");
    if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must be in (0, 1]");
}

// ---------------------------------------------------------------------------
// TreeNode

void TreeNode::expand(std::size_t num_actions) {
    actions.assign(num_actions, {});
    if (shielded.size() < num_actions) shielded.resize(num_actions, false);
}

void TreeNode::add_particle(StateId s) {
    particles.push_back(s);
    particle_support.insert(s);
}

TreeNode* TreeNode::child(ActionId a, ObservationId o) {
    auto it = children.find({a, o});
    return it == children.end() ? nullptr : it->second.get();
}

const TreeNode* TreeNode::child(ActionId a, ObservationId o) const {
    auto it = children.find({a, o});
    return it == children.end() ? nullptr : it->second.get();
}

TreeNode& TreeNode::make_child(ActionId a, ObservationId o) {
    auto& slot = children[{a, o}];
    if (!slot) slot = std::make_unique<TreeNode>(particle_support.universe());
    return *slot;
}

void TreeNode::shield(ActionId a) {
    if (shielded.size() <= a) shielded.resize(a + 1, false);
    shielded[a] = true;
    auto it = children.lower_bound({a, 0});
    while (it != children.end() && it->first.first == a) it = children.erase(it);
}

std::size_t TreeNode::unshielded_count(std::size_t num_actions) const {
    std::size_t n = 0;
    for (ActionId a = 0; a < num_actions; ++a)
        if (!is_shielded(a)) ++n;
    return n;
}

std::size_t TreeNode::size() const {
    std::size_t n = 1;
    for (const auto& [key, c] : children) n += c->size();
    return n;
}

std::optional<ActionId> ucb_select(const TreeNode& node, double c, std::size_t num_actions) {
    const auto A = node.expanded() ? node.actions.size() : num_actions;
    const double log_n = node.visits > 0 ? std::log(static_cast<double>(node.visits)) : 0.0;
    std::optional<ActionId> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < A; ++a) {
        if (node.is_shielded(a)) continue;
        const auto& st = node.expanded() ? node.actions[a] : ActionStats{};
        if (st.visits == 0) return a;
        const double score = st.value + c * std::sqrt(log_n / static_cast<double>(st.visits));
        if (!best || score > best_score) {
            best = a;
            best_score = score;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Search

namespace {

class Search {
public:
    Search(const Pomdp& m, const PlannerConfig& cfg, Rng& rng, SearchShield* shield)
        : m_(m), cfg_(cfg), rng_(rng), shield_(shield), c_(cfg.exploration(m)) {}

    /// nullopt: every action at `h` is shielded.
    std::optional<double> simulate(StateId s, TreeNode& h, int depth) {
        if (depth >= cfg_.depth || m_.is_terminal(s)) return 0.0;
        const auto A = m_.num_actions();
        if (!h.expanded()) {
            h.expand(A);
            if (h.unshielded_count(A) == 0) return std::nullopt;
            const double ret = rollout(s, depth, &h);
            record(h, ret);
            return ret;
        }
        for (;;) {
            const auto a = ucb_select(h, c_);
            if (!a) return std::nullopt;
            const auto step = sample_step(m_, s, *a, rng_);
            TreeNode* child = h.child(*a, step.observation);
            if (!child) {
                child = &h.make_child(*a, step.observation);
                if (shield_ && h.exact_support)
                    child->exact_support = support_post(m_, *h.exact_support, *a, step.observation);
            }
            if (shield_ && !shield_->allow_branch(*child, step.next_state)) {
                h.shield(*a);
                ++stats.tree_prunes;
                continue;
            }
            child->add_particle(step.next_state);
            const auto future = simulate(step.next_state, *child, depth + 1);
            if (!future) {
                h.shield(*a);
                ++stats.escalations;
                continue;
            }
            const double ret = step.reward + cfg_.discount * *future;
            record(h, ret);
            auto& as = h.actions[*a];
            ++as.visits;
            as.value += (ret - as.value) / static_cast<double>(as.visits);
            return ret;
        }
    }

    SearchStats stats;

private:
    static void record(TreeNode& h, double ret) {
        ++h.visits;
        h.value += (ret - h.value) / static_cast<double>(h.visits);
    }

    double rollout(StateId s, int depth, const TreeNode* leaf) {
        const auto A = m_.num_actions();
        double ret = 0.0, scale = 1.0;
        std::vector<ActionId> candidates;
        while (depth < cfg_.depth && !m_.is_terminal(s)) {
            candidates.clear();
            for (ActionId a = 0; a < A; ++a)
                if (!leaf || !leaf->is_shielded(a)) candidates.push_back(a);
            leaf = nullptr;
            std::optional<SimStep> step;
            while (!candidates.empty()) {
                const auto i = uniform_index(rng_, candidates.size());
                step = sample_step(m_, s, candidates[i], rng_);
                if (!shield_ || shield_->allow_rollout_state(step->next_state)) break;
                ++stats.rollout_rejections;
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(i));
                step.reset();
            }
            if (!step) {
                ++stats.rollout_truncations;
                break;
            }
            ret += scale * step->reward;
            scale *= cfg_.discount;
            s = step->next_state;
            ++depth;
        }
        return ret;
    }

    const Pomdp& m_;
    const PlannerConfig& cfg_;
    Rng& rng_;
    SearchShield* shield_;
    double c_;
};

std::optional<ActionId> greedy(const TreeNode& root, std::size_t A) {
    std::optional<ActionId> best;
    double best_value = 0.0;
    for (ActionId a = 0; a < A; ++a) {
        if (root.is_shielded(a) || !root.expanded() || root.actions[a].visits == 0) continue;
        if (!best || root.actions[a].value > best_value) {
            best = a;
            best_value = root.actions[a].value;
        }
    }
    if (best) return best;
    for (ActionId a = 0; a < A; ++a)
        if (!root.is_shielded(a)) return a;
    return std::nullopt;
}

}  // namespace

PlanResult plan_step(const Pomdp& m, TreeNode& root, const PlannerConfig& cfg, Rng& rng, SearchShield* shield) {
    if (root.particles.empty()) throw BeliefCollapse("root has no particles");
    const auto A = m.num_actions();
    if (root.unshielded_count(A) == 0) throw NoSafeAction("every action at the root is shielded");
    Search search(m, cfg, rng, shield);
    for (std::size_t i = 0; i < cfg.simulations; ++i) {
        const StateId s = root.particles[uniform_index(rng, root.particles.size())];
        if (!search.simulate(s, root, 0)) throw NoSafeAction("backtracking pruned every action at the root");
        ++search.stats.simulations;
    }
    for (;;) {
        const auto a = greedy(root, A);
        if (!a) throw NoSafeAction("no root action passes the exact support check");
        if (shield && root.exact_support && !shield->allow_root_action(*root.exact_support, *a)) {
            root.shield(*a);
            ++search.stats.root_rejections;
            continue;
        }
        return {*a, search.stats};
    }
}

TreeNode initial_root(const Pomdp& m, const PlannerConfig& cfg, Rng& rng) {
    TreeNode root(m.num_states());
    root.particles.reserve(cfg.particles);
    for (std::size_t i = 0; i < cfg.particles; ++i) root.add_particle(sample_initial_state(m, rng));
    root.exact_support = m.initial_support();
    return root;
}

TreeNode advance_root(const Pomdp& m, TreeNode&& root, ActionId a, ObservationId o, const PlannerConfig& cfg,
                      Rng& rng) {
    TreeNode next(m.num_states());
    if (auto* c = root.child(a, o)) next = std::move(*c);
    if (next.particles.size() > cfg.particles) {
        next.particles.resize(cfg.particles);
        next.particle_support = BeliefSupport(m.num_states());
        for (auto s : next.particles) next.particle_support.insert(s);
    }
    const std::size_t cap = 10 * cfg.particles;
    for (std::size_t tries = 0; next.particles.size() < cfg.particles && tries < cap && !root.particles.empty();
         ++tries) {
        const StateId s = root.particles[uniform_index(rng, root.particles.size())];
        const auto step = sample_step(m, s, a, rng);
        if (step.observation == o) next.add_particle(step.next_state);
    }
    if (root.exact_support) {
        auto post = support_post(m, *root.exact_support, a, o);
        if (post.empty())
            throw ImpossibleObservation("observation " + m.observation_name(o) + " is impossible after " +
                                        m.action_name(a) + " from " + format_support(m, *root.exact_support));
        next.exact_support = std::move(post);
    }
    if (next.particles.empty())
        throw BeliefCollapse("no particle consistent with " + m.action_name(a) + "/" + m.observation_name(o));
    return next;
}

}  // namespace safepomcp
