#include "safepomcp/factored.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace safepomcp {

// ---------------------------------------------------------------------------
// Submodel

std::optional<StateId> Submodel::to_local(StateId global) const {
    auto it = std::lower_bound(states.begin(), states.end(), global);
    if (it == states.end() || *it != global) return std::nullopt;
    return static_cast<StateId>(it - states.begin());
}

BeliefSupport Submodel::to_local(const BeliefSupport& global) const {
    BeliefSupport out(states.size());
    global.for_each([&](StateId s) {
        auto l = to_local(s);
        if (!l) throw std::invalid_argument("support leaves submodel " + label);
        out.insert(*l);
    });
    return out;
}

BeliefSupport Submodel::to_global(const BeliefSupport& local) const {
    BeliefSupport out(own.universe());
    local.for_each([&](StateId l) { out.insert(states[l]); });
    return out;
}

std::vector<Submodel> decompose(const Pomdp& m, std::vector<std::string>* warnings) {
    if (!m.has_partition()) throw std::invalid_argument("decompose needs a model with region labels");
    const auto S = m.num_states();
    const auto A = m.num_actions();
    const auto O = m.num_observations();

    std::vector<std::string> labels;
    std::vector<std::size_t> cell_of(S);
    for (StateId s = 0; s < S; ++s) {
        const auto& l = m.region_label(s);
        auto it = std::find(labels.begin(), labels.end(), l);
        cell_of[s] = static_cast<std::size_t>(it - labels.begin());
        if (it == labels.end()) labels.push_back(l);
    }
    const auto N = labels.size();

    std::vector<Submodel> subs(N);
    std::vector<BeliefSupport> inlets(N, BeliefSupport(S));
    for (std::size_t i = 0; i < N; ++i) {
        subs[i].label = labels[i];
        subs[i].own = BeliefSupport(S);
        subs[i].extended = BeliefSupport(S);
    }
    for (StateId s = 0; s < S; ++s) {
        const auto i = cell_of[s];
        subs[i].own.insert(s);
        subs[i].extended.insert(s);
        for (ActionId a = 0; a < A; ++a)
            for (const auto& t : m.transitions(s, a)) {
                if (t.prob <= kSupportEpsilon || cell_of[t.id] == i) continue;
                subs[i].extended.insert(t.id);
                inlets[cell_of[t.id]].insert(t.id);
            }
    }

    const auto initial = m.initial_support();
    for (std::size_t i = 0; i < N; ++i) {
        auto& sub = subs[i];
        sub.states = sub.extended.members();
        const auto n = sub.states.size();
        PomdpBuilder b(n, A, O);
        for (ActionId a = 0; a < A; ++a) b.action_name(a, m.action_name(a));
        for (ObservationId o = 0; o < O; ++o) b.observation_name(o, m.observation_name(o));
        sub.init = BeliefSupport(n);
        sub.reach = BeliefSupport(n);
        sub.avoid = BeliefSupport(n);
        for (StateId l = 0; l < n; ++l) {
            const StateId g = sub.states[l];
            b.state_name(l, m.state_name(g));
            const bool outlet = !sub.own.contains(g);
            for (ActionId a = 0; a < A; ++a) {
                for (const auto& z : m.observations(g, a)) b.observation(l, a, z.id, z.prob);
                if (outlet) {
                    b.transition(l, a, l, 1.0);
                    continue;
                }
                for (const auto& t : m.transitions(g, a)) b.transition(l, a, *sub.to_local(t.id), t.prob);
                b.reward(l, a, m.reward(g, a));
            }
            if (outlet) sub.outlets.emplace(l, cell_of[g]);
            if (m.reach().contains(g)) {
                b.reach(l);
                sub.reach.insert(l);
            }
            if (m.avoid().contains(g)) {
                b.avoid(l);
                sub.avoid.insert(l);
            }
            if (!outlet && (initial.contains(g) || inlets[i].contains(g)) && !m.avoid().contains(g)) sub.init.insert(l);
        }
        sub.model = std::make_shared<const Pomdp>(std::move(b).build({ReachPolicy::ForceAbsorbing, false}));
    }
    for (std::size_t k = 0; k < N; ++k) {
        std::set<std::size_t> targets;
        for (const auto& [l, owner] : subs[k].outlets) targets.insert(owner);
        for (auto j : targets) subs[j].adjacency.push_back(k);
    }
    for (auto& sub : subs) std::sort(sub.adjacency.begin(), sub.adjacency.end());

    if (warnings) {
        BeliefSupport seen = initial;
        for (const auto& sub : subs) seen |= sub.to_global(sub.init);
        std::vector<StateId> stack = seen.members();
        while (!stack.empty()) {
            const auto s = stack.back();
            stack.pop_back();
            for (ActionId a = 0; a < A; ++a)
                for (const auto& t : m.transitions(s, a))
                    if (t.prob > kSupportEpsilon && !seen.contains(t.id)) {
                        seen.insert(t.id);
                        stack.push_back(t.id);
                    }
        }
        const auto unreachable = S - seen.size();
        if (unreachable > 0)
            warnings->push_back(std::to_string(unreachable) + " state(s) are reachable from no submodel's initial states");
    }
    return subs;
}

// ---------------------------------------------------------------------------
// FactoredRegion

FactoredRegion::FactoredRegion(std::shared_ptr<const Pomdp> model, Spec spec, std::vector<Submodel> submodels,
                               std::vector<WinningRegion> regions, PropagationStats stats)
    : model_(std::move(model)),
      spec_(std::move(spec)),
      submodels_(std::move(submodels)),
      regions_(std::move(regions)),
      stats_(stats) {
    if (regions_.size() != submodels_.size()) throw std::invalid_argument("one region per submodel is required");
}

std::vector<std::size_t> FactoredRegion::accepting(const BeliefSupport& u) const {
    std::vector<std::size_t> out;
    if (u.empty()) return out;
    for (std::size_t i = 0; i < submodels_.size(); ++i) {
        const auto& sub = submodels_[i];
        if (u.is_subset_of(sub.extended) && regions_[i].contains(sub.to_local(u))) out.push_back(i);
    }
    return out;
}

bool FactoredRegion::union_contains(const BeliefSupport& u) const {
    if (u.empty()) return false;
    for (std::size_t i = 0; i < submodels_.size(); ++i) {
        const auto& sub = submodels_[i];
        if (u.is_subset_of(sub.extended) && regions_[i].contains(sub.to_local(u))) return true;
    }
    return false;
}

std::vector<BeliefSupport> FactoredRegion::global_elements() const {
    std::vector<BeliefSupport> out;
    for (std::size_t i = 0; i < submodels_.size(); ++i)
        for (const auto& u : regions_[i].antichain()) out.push_back(submodels_[i].to_global(u));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

std::vector<BeliefSupport> initial_seeds(const Submodel& sub, bool all_subsets) {
    const auto n = sub.states.size();
    std::vector<BeliefSupport> seeds;
    if (all_subsets) {
        if (n > 20) throw std::invalid_argument("all-subset seeding is limited to 20 states per submodel");
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            BeliefSupport u(n);
            for (StateId l = 0; l < n; ++l)
                if (mask & (1u << l)) u.insert(l);
            seeds.push_back(std::move(u));
        }
        return seeds;
    }
    sub.init.for_each([&](StateId l) { seeds.push_back(BeliefSupport(n, {l})); });
    return seeds;
}

}  // namespace

FactoredRegion propagate_factored_regions(std::shared_ptr<const Pomdp> model, std::vector<Submodel> subs,
                                          const Spec& spec, const FactoredOptions& options) {
    const auto N = subs.size();
    PropagationStats stats;
    std::vector<std::unique_ptr<RegionSolver>> solvers;
    std::vector<std::optional<WinningRegion>> regions(N);
    for (auto& sub : subs) {
        BeliefSupport reach(sub.states.size()), avoid(sub.states.size());
        for (StateId l = 0; l < sub.states.size(); ++l) {
            if (spec.reach.contains(sub.states[l])) reach.insert(l);
            if (spec.avoid.contains(sub.states[l])) avoid.insert(l);
        }
        sub.reach = reach;
        sub.avoid = avoid;
        solvers.push_back(std::make_unique<RegionSolver>(sub.model, Spec{reach, avoid}, options.region));
        auto seeds = initial_seeds(sub, options.seed_all_subsets);
        const auto b0 = model->initial_support();
        if (!b0.intersects(spec.avoid) && b0.is_subset_of(sub.own)) seeds.push_back(sub.to_local(b0));
        solvers.back()->add_seeds(seeds);
    }

    std::deque<std::pair<std::size_t, std::size_t>> queue;
    std::set<std::pair<std::size_t, std::size_t>> pending;
    auto put = [&](std::size_t k, std::size_t j) {
        if (!pending.insert({k, j}).second) return;
        queue.emplace_back(k, j);
        ++stats.pushes;
    };
    auto recompute = [&](std::size_t i) {
        regions[i] = solvers[i]->region();
        for (auto k : subs[i].adjacency) put(k, i);
    };

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    if (options.shuffle_seed) {
        Rng rng(*options.shuffle_seed);
        for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    for (auto j : order)
        if (!subs[j].reach.empty()) recompute(j);

    while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        pending.erase({i, j});
        ++stats.pops;
        auto& sub = subs[i];
        bool grew = false;
        for (const auto& [l, owner] : sub.outlets) {
            if (owner != j || sub.reach.contains(l) || sub.avoid.contains(l)) continue;
            const auto lj = subs[j].to_local(sub.states[l]);
            if (regions[j] && lj && regions[j]->contains_state(*lj)) {
                sub.reach.insert(l);
                grew = true;
            }
        }
        if (!grew) continue;
        ++stats.updates;
        solvers[i]->set_reach(sub.reach);
        recompute(i);
    }

    std::vector<WinningRegion> out;
    for (std::size_t i = 0; i < N; ++i) out.push_back(regions[i] ? std::move(*regions[i]) : solvers[i]->region());
    return FactoredRegion(std::move(model), spec, std::move(subs), std::move(out), stats);
}

FactoredRegion compute_factored_region(std::shared_ptr<const Pomdp> model, const FactoredOptions& options) {
    auto subs = decompose(*model);
    const auto spec = Spec::from_model(*model);
    return propagate_factored_regions(std::move(model), std::move(subs), spec, options);
}

// ---------------------------------------------------------------------------
// FactoredMembership

FactoredMembership::FactoredMembership(std::shared_ptr<const FactoredRegion> region, std::size_t max_vertices)
    : region_(std::move(region)), max_vertices_(max_vertices), solvers_(region_->submodels().size()) {}

bool FactoredMembership::submodel_accepts(std::size_t i, const BeliefSupport& local, bool extend) {
    const auto& w = region_->region(i);
    if (w.contains(local)) return true;
    if (local.intersects(w.spec().avoid)) return false;
    // Whether a support wins depends only on its forward closure, so one
    // growing graph per submodel answers every query.
    auto& solver = solvers_[i];
    if (!extend) {
        if (!solver) return false;
        const auto v = solver->graph().find(local);
        return v && solver->solve()[*v];
    }
    if (!solver) {
        RegionOptions opts;
        opts.max_vertices = max_vertices_;
        solver = std::make_unique<RegionSolver>(region_->submodels()[i].model, w.spec(), opts);
    }
    if (!solver->graph().find(local)) {
        try {
            solver->add_seeds({local});
        } catch (const GraphCapExceeded&) {
            // The graph is left with unexpanded vertices, which never count as winning.
            return false;
        }
        ++extensions_;
    }
    const auto v = solver->graph().find(local);
    return v && solver->solve()[*v];
}

bool FactoredMembership::contains(const BeliefSupport& u, bool extend) {
    if (u.empty()) return false;
    if (auto it = memo_.find(u); it != memo_.end()) return it->second;
    const auto& f = *region_;
    bool result = false;
    for (std::size_t i = 0; i < f.submodels().size() && !result; ++i) {
        const auto& sub = f.submodels()[i];
        if (!u.is_subset_of(sub.extended)) continue;
        const auto local = sub.to_local(u);
        if (!submodel_accepts(i, local, extend)) continue;
        // Reaching a hand-off set only counts if a neighbour takes over.
        const bool handoff = local.is_subset_of(sub.reach) && !u.is_subset_of(f.spec().reach);
        result = !handoff;
    }
    if (extend || result) memo_.emplace(u, result);
    return result;
}

// ---------------------------------------------------------------------------
// Files

namespace {

void write_names(std::ostream& out, const Pomdp& m, const BeliefSupport& u) {
    u.for_each([&](StateId s) { out << ' ' << m.state_name(s); });
}

BeliefSupport read_names(std::istringstream& in, const Pomdp& m, int line) {
    BeliefSupport u(m.num_states());
    std::string name;
    while (in >> name) {
        auto s = m.find_state(name);
        if (!s) throw std::invalid_argument("region file line " + std::to_string(line) + ": unknown state " + name);
        u.insert(*s);
    }
    return u;
}

}  // namespace

void write_factored_region(std::ostream& out, const FactoredRegion& f) {
    const auto& m = f.model();
    out << "# safepomcp factored region\n";
    out << "model " << hex64(m.content_hash()) << '\n';
    out << "spec " << hex64(f.spec().hash()) << '\n';
    for (std::size_t i = 0; i < f.submodels().size(); ++i) {
        const auto& sub = f.submodels()[i];
        out << "submodel " << sub.label << '\n';
        out << "reach";
        write_names(out, m, sub.to_global(sub.reach));
        out << '\n';
        for (const auto& u : f.region(i).antichain()) {
            out << 'W';
            write_names(out, m, sub.to_global(u));
            out << '\n';
        }
    }
}

FactoredRegion read_factored_region(std::istream& in, std::shared_ptr<const Pomdp> model) {
    const auto& m = *model;
    auto subs = decompose(m);
    const auto spec = Spec::from_model(m);
    std::vector<std::vector<BeliefSupport>> elements(subs.size());
    std::vector<bool> seen(subs.size(), false);
    std::optional<std::size_t> current;
    std::string line, model_hash, spec_hash;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw std::invalid_argument("factored region file line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "model") {
            ls >> model_hash;
        } else if (kw == "spec") {
            ls >> spec_hash;
        } else if (kw == "submodel") {
            std::string label;
            ls >> label;
            auto it = std::find_if(subs.begin(), subs.end(), [&](const Submodel& s) { return s.label == label; });
            if (it == subs.end()) fail("unknown submodel " + label);
            current = static_cast<std::size_t>(it - subs.begin());
            seen[*current] = true;
        } else if (kw == "reach" || kw == "W") {
            if (!current) fail(kw + " before any submodel line");
            auto& sub = subs[*current];
            const auto u = read_names(ls, m, line_no);
            if (!u.is_subset_of(sub.extended)) fail("support outside submodel " + sub.label);
            if (kw == "reach") sub.reach = sub.to_local(u);
            else elements[*current].push_back(sub.to_local(u));
        } else {
            fail("unknown keyword " + kw);
        }
    }
    if (model_hash != hex64(m.content_hash()))
        throw std::invalid_argument("factored region file was computed for a different model (hash " + model_hash + ")");
    if (spec_hash != hex64(spec.hash())) throw std::invalid_argument("factored region file spec hash mismatch");
    std::vector<WinningRegion> regions;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!seen[i]) throw std::invalid_argument("factored region file lacks submodel " + subs[i].label);
        auto& sub = subs[i];
        BeliefSupport avoid(sub.states.size());
        for (StateId l = 0; l < sub.states.size(); ++l)
            if (spec.avoid.contains(sub.states[l])) avoid.insert(l);
        sub.avoid = avoid;
        regions.emplace_back(sub.model, Spec{sub.reach, avoid}, std::move(elements[i]));
    }
    return FactoredRegion(std::move(model), spec, std::move(subs), std::move(regions));
}

void save_factored_region(const FactoredRegion& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write region file: " + path);
    write_factored_region(out, f);
}

FactoredRegion load_factored_region(const std::string& path, std::shared_ptr<const Pomdp> model) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open region file: " + path);
    return read_factored_region(in, std::move(model));
}

}  // namespace safepomcp
