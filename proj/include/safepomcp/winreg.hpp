#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "safepomcp/model.hpp"
#include "safepomcp/support.hpp"

namespace safepomcp {

/// Almost-sure reach-avoid objective: reach `reach` with probability one
/// while visiting `avoid` with probability zero.
struct Spec {
    BeliefSupport reach;
    BeliefSupport avoid;

    static Spec from_model(const Pomdp& m) { return {m.reach(), m.avoid()}; }
    std::uint64_t hash() const;
    friend bool operator==(const Spec&, const Spec&) = default;
};

/// The support graph outgrew its vertex cap; switch to factored shielding.
class GraphCapExceeded : public std::runtime_error {
public:
    explicit GraphCapExceeded(std::size_t cap);
};

class RegionTimeout : public std::runtime_error {
public:
    RegionTimeout() : std::runtime_error("winning region computation timed out") {}
};

/// A shield query that presupposes a winning support was made on a losing one.
class ShieldContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct RegionOptions {
    std::size_t max_vertices = 5'000'000;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Reachable belief-support abstraction: vertices are supports, edges are
/// (action, observation) updates. Supports touching the avoid set are kept as
/// sinks and never expanded.
class SupportGraph {
public:
    struct Edge {
        ActionId action;
        ObservationId observation;
        std::uint32_t target;
    };

    SupportGraph(std::shared_ptr<const Pomdp> model, BeliefSupport avoid, RegionOptions options = {});

    /// Adds seeds and closes the vertex set under support_post_all.
    void add_seeds(const std::vector<BeliefSupport>& seeds);

    std::size_t size() const { return vertices_.size(); }
    const BeliefSupport& vertex(std::uint32_t v) const { return vertices_[v]; }
    const std::vector<BeliefSupport>& vertices() const { return vertices_; }
    std::optional<std::uint32_t> find(const BeliefSupport& u) const;
    /// Out-edges ordered by (action, observation).
    const std::vector<Edge>& edges(std::uint32_t v) const { return edges_[v]; }
    bool expanded(std::uint32_t v) const { return expanded_[v]; }
    const std::vector<std::uint32_t>& seeds() const { return seeds_; }

    const Pomdp& model() const { return *model_; }
    const std::shared_ptr<const Pomdp>& model_ptr() const { return model_; }
    const BeliefSupport& avoid() const { return avoid_; }

private:
    std::uint32_t intern(const BeliefSupport& u);

    std::shared_ptr<const Pomdp> model_;
    BeliefSupport avoid_;
    RegionOptions options_;
    std::vector<BeliefSupport> vertices_;
    std::vector<std::vector<Edge>> edges_;
    std::vector<bool> expanded_;
    std::vector<std::uint32_t> seeds_;
    std::unordered_map<BeliefSupport, std::uint32_t, BeliefSupportHash> index_;
    std::size_t frontier_ = 0;
};

SupportGraph build_support_graph(std::shared_ptr<const Pomdp> model, const std::vector<BeliefSupport>& seeds,
                                 const BeliefSupport& avoid, RegionOptions options = {});

/// Winning supports stored as an antichain of maximal elements; membership is
/// downward closure (u is winning iff u is a subset of some element).
class WinningRegion {
public:
    WinningRegion(std::shared_ptr<const Pomdp> model, Spec spec, std::vector<BeliefSupport> winning);

    const std::vector<BeliefSupport>& antichain() const { return antichain_; }
    bool empty() const { return antichain_.empty(); }
    bool contains(const BeliefSupport& u) const;
    bool contains_state(StateId s) const { return covered_.contains(s); }

    const Pomdp& model() const { return *model_; }
    const std::shared_ptr<const Pomdp>& model_ptr() const { return model_; }
    const Spec& spec() const { return spec_; }

private:
    std::shared_ptr<const Pomdp> model_;
    Spec spec_;
    std::vector<BeliefSupport> antichain_;
    BeliefSupport covered_;
    std::vector<std::vector<std::uint32_t>> by_state_;
};

/// Greatest-fixpoint solver over a support graph. The graph can grow (more
/// seeds) and the reach set can change; solve() recomputes from scratch.
class RegionSolver {
public:
    RegionSolver(std::shared_ptr<const Pomdp> model, Spec spec, RegionOptions options = {});

    void add_seeds(const std::vector<BeliefSupport>& seeds);
    /// Replaces the reach set; the avoid set is fixed for the graph's lifetime.
    void set_reach(const BeliefSupport& reach);

    /// Per-vertex winning flags for the current graph and spec.
    const std::vector<bool>& solve();
    WinningRegion region();

    const SupportGraph& graph() const { return graph_; }
    const Spec& spec() const { return spec_; }

private:
    void check_deadline() const;

    Spec spec_;
    RegionOptions options_;
    SupportGraph graph_;
    std::vector<bool> winning_;
    bool solved_ = false;
};

WinningRegion compute_winning_region(std::shared_ptr<const Pomdp> model, const Spec& spec,
                                     const std::vector<BeliefSupport>& seeds, RegionOptions options = {});
inline WinningRegion compute_winning_region(std::shared_ptr<const Pomdp> model, RegionOptions options = {}) {
    const Spec spec = Spec::from_model(*model);
    const auto seed = model->initial_support();
    return compute_winning_region(std::move(model), spec, {seed}, options);
}

inline bool region_contains(const WinningRegion& w, const BeliefSupport& u) { return w.contains(u); }

/// The shield: actions whose every non-empty observation branch stays in w.
/// Throws ShieldContractError when u itself is not winning.
std::vector<ActionId> allowed_actions(const WinningRegion& w, const Pomdp& m, const BeliefSupport& u);

using WitnessPath = std::vector<std::pair<ActionId, ObservationId>>;

/// Finite path of allowed actions and possible observations from u to a
/// support inside the reach set; every intermediate support is winning.
WitnessPath productivity_witness(const WinningRegion& w, const Pomdp& m, const BeliefSupport& u);

/// Independent audit of a region: elements avoid-free, every non-goal
/// element has an allowed action, every element has a productivity witness.
/// Returns one message per problem found.
std::vector<std::string> verify_region(const WinningRegion& w);

/// Region file: header lines with the model and spec hashes, then one
/// `W <state names...>` line per antichain element.
void write_region(std::ostream& out, const WinningRegion& w);
WinningRegion read_region(std::istream& in, std::shared_ptr<const Pomdp> model);
void save_region(const WinningRegion& w, const std::string& path);
WinningRegion load_region(const std::string& path, std::shared_ptr<const Pomdp> model);

std::string hex64(std::uint64_t x);

}  // namespace safepomcp
