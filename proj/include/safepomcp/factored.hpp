#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "safepomcp/model.hpp"
#include "safepomcp/winreg.hpp"

namespace safepomcp {

/// Projection of a labeled POMDP onto one partition cell. States of the cell
/// keep their dynamics; one-step exits (outlets) become absorbing.
struct Submodel {
    std::string label;
    /// Global ids of the submodel's states, ascending; local id = position.
    std::vector<StateId> states;
    /// Global-universe views: own cell, and own cell plus outlets.
    BeliefSupport own;
    BeliefSupport extended;
    std::shared_ptr<const Pomdp> model;
    /// Local-universe sets.
    BeliefSupport init;
    BeliefSupport reach;
    BeliefSupport avoid;
    /// Local outlet id -> index of the submodel owning that state.
    std::map<StateId, std::size_t> outlets;
    /// Submodels that can exit into this one.
    std::vector<std::size_t> adjacency;

    std::optional<StateId> to_local(StateId global) const;
    /// Requires u to be inside `extended`.
    BeliefSupport to_local(const BeliefSupport& global) const;
    BeliefSupport to_global(const BeliefSupport& local) const;
};

/// One submodel per region label, in order of first appearance. Throws
/// std::invalid_argument when the model has no partition labels.
std::vector<Submodel> decompose(const Pomdp& m, std::vector<std::string>* warnings = nullptr);

struct FactoredOptions {
    RegionOptions region;
    /// Shuffle the initial queue order (order independence checks).
    std::optional<std::uint64_t> shuffle_seed;
    /// Seed every submodel with all its non-empty state subsets instead of
    /// init singletons. Only for tiny models.
    bool seed_all_subsets = false;
};

struct PropagationStats {
    std::size_t pushes = 0;
    std::size_t pops = 0;
    std::size_t updates = 0;
};

/// Per-submodel winning regions produced by the queue propagation.
class FactoredRegion {
public:
    FactoredRegion(std::shared_ptr<const Pomdp> model, Spec spec, std::vector<Submodel> submodels,
                   std::vector<WinningRegion> regions, PropagationStats stats = {});

    const Pomdp& model() const { return *model_; }
    const std::shared_ptr<const Pomdp>& model_ptr() const { return model_; }
    const Spec& spec() const { return spec_; }
    const std::vector<Submodel>& submodels() const { return submodels_; }
    const WinningRegion& region(std::size_t i) const { return regions_[i]; }
    const PropagationStats& stats() const { return stats_; }

    /// u is accepted iff some submodel's extended state set holds u and its
    /// region contains the local projection.
    bool union_contains(const BeliefSupport& u) const;
    /// Submodels whose region accepts u.
    std::vector<std::size_t> accepting(const BeliefSupport& u) const;
    /// Every antichain element mapped to global ids, deduplicated.
    std::vector<BeliefSupport> global_elements() const;

private:
    std::shared_ptr<const Pomdp> model_;
    Spec spec_;
    std::vector<Submodel> submodels_;
    std::vector<WinningRegion> regions_;
    PropagationStats stats_;
};

FactoredRegion propagate_factored_regions(std::shared_ptr<const Pomdp> model, std::vector<Submodel> submodels,
                                          const Spec& spec, const FactoredOptions& options = {});
FactoredRegion compute_factored_region(std::shared_ptr<const Pomdp> model, const FactoredOptions& options = {});

inline bool union_contains(const FactoredRegion& f, const BeliefSupport& u) { return f.union_contains(u); }

/// Shield-side membership over a factored region. Supports the propagation
/// never visited (e.g. ones straddling a door) are solved on demand in the
/// owning submodel with the final reach set. A support that is only a
/// hand-off target of one submodel must be accepted by a submodel that owns
/// it, so the planner is never left at a support without a continuation.
class FactoredMembership {
public:
    /// `max_vertices` bounds each submodel's on-demand graph; supports that
    /// would exceed it are rejected.
    explicit FactoredMembership(std::shared_ptr<const FactoredRegion> region, std::size_t max_vertices = 1'000'000);

    /// With `extend` false, unsolved supports are answered from the graphs
    /// built so far (a miss counts as rejection).
    bool contains(const BeliefSupport& u, bool extend = true);
    const FactoredRegion& region() const { return *region_; }
    std::size_t extensions() const { return extensions_; }

private:
    bool submodel_accepts(std::size_t i, const BeliefSupport& local, bool extend);

    std::shared_ptr<const FactoredRegion> region_;
    std::size_t max_vertices_;
    std::vector<std::unique_ptr<RegionSolver>> solvers_;
    std::unordered_map<BeliefSupport, bool, BeliefSupportHash> memo_;
    std::size_t extensions_ = 0;
};

/// Factored region file: the centralized header followed by one block per
/// submodel (`submodel <label>`, `reach <names>`, then `W` lines in global names).
void write_factored_region(std::ostream& out, const FactoredRegion& f);
FactoredRegion read_factored_region(std::istream& in, std::shared_ptr<const Pomdp> model);
void save_factored_region(const FactoredRegion& f, const std::string& path);
FactoredRegion load_factored_region(const std::string& path, std::shared_ptr<const Pomdp> model);

}  // namespace safepomcp
