#include "safepomcp/winreg.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace safepomcp {

namespace {

std::uint64_t fnv(std::uint64_t h, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xff;
        h *= 1099511628211ULL;
    }
    return h;
}

bool past(const std::optional<std::chrono::steady_clock::time_point>& deadline) {
    return deadline && std::chrono::steady_clock::now() > *deadline;
}

}  // namespace

std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

std::uint64_t Spec::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    h = fnv(h, reach.universe());
    for (auto w : reach.words()) h = fnv(h, w);
    h = fnv(h, 0x5a5a5a5a5a5a5a5aULL);
    for (auto w : avoid.words()) h = fnv(h, w);
    return h;
}

GraphCapExceeded::GraphCapExceeded(std::size_t cap)
    : std::runtime_error("support graph exceeded " + std::to_string(cap) +
                         " vertices; use factored shielding for this model") {}

// ---------------------------------------------------------------------------
// SupportGraph

SupportGraph::SupportGraph(std::shared_ptr<const Pomdp> model, BeliefSupport avoid, RegionOptions options)
    : model_(std::move(model)), avoid_(std::move(avoid)), options_(options) {}

std::optional<std::uint32_t> SupportGraph::find(const BeliefSupport& u) const {
    auto it = index_.find(u);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t SupportGraph::intern(const BeliefSupport& u) {
    auto [it, inserted] = index_.try_emplace(u, static_cast<std::uint32_t>(vertices_.size()));
    if (inserted) {
        if (vertices_.size() >= options_.max_vertices) {
            index_.erase(it);
            throw GraphCapExceeded(options_.max_vertices);
        }
        vertices_.push_back(u);
        edges_.emplace_back();
        expanded_.push_back(false);
    }
    return it->second;
}

void SupportGraph::add_seeds(const std::vector<BeliefSupport>& seeds) {
    for (const auto& seed : seeds) {
        if (seed.empty() || seed.universe() != model_->num_states())
            throw std::invalid_argument("seed supports must be non-empty and match the model's state count");
        const auto v = intern(seed);
        if (std::find(seeds_.begin(), seeds_.end(), v) == seeds_.end()) seeds_.push_back(v);
    }
    // Vertices are expanded in discovery order, so ids stay deterministic.
    const auto A = model_->num_actions();
    while (frontier_ < vertices_.size()) {
        const auto v = static_cast<std::uint32_t>(frontier_++);
        if ((frontier_ & 0x3ff) == 0 && past(options_.deadline)) throw RegionTimeout();
        if (vertices_[v].intersects(avoid_)) continue;
        std::vector<Edge> out;
        for (ActionId a = 0; a < A; ++a) {
            // Copy: intern() may reallocate vertices_.
            const BeliefSupport u = vertices_[v];
            for (auto& branch : support_post_all(*model_, u, a))
                out.push_back({a, branch.observation, intern(branch.support)});
        }
        edges_[v] = std::move(out);
        expanded_[v] = true;
    }
}

SupportGraph build_support_graph(std::shared_ptr<const Pomdp> model, const std::vector<BeliefSupport>& seeds,
                                 const BeliefSupport& avoid, RegionOptions options) {
    if (seeds.empty()) throw std::invalid_argument("build_support_graph needs at least one seed");
    SupportGraph g(std::move(model), avoid, options);
    g.add_seeds(seeds);
    return g;
}

// ---------------------------------------------------------------------------
// WinningRegion

WinningRegion::WinningRegion(std::shared_ptr<const Pomdp> model, Spec spec, std::vector<BeliefSupport> winning)
    : model_(std::move(model)), spec_(std::move(spec)) {
    const auto S = model_->num_states();
    covered_ = BeliefSupport(S);
    by_state_.assign(S, {});
    // Larger supports first: an element can only be dominated by one at least as big.
    std::stable_sort(winning.begin(), winning.end(),
                     [](const BeliefSupport& x, const BeliefSupport& y) { return x.size() > y.size(); });
    for (auto& u : winning) {
        if (u.empty()) continue;
        if (u.intersects(spec_.avoid))
            throw std::logic_error("winning region element intersects the avoid set");
        if (contains(u)) continue;
        const auto id = static_cast<std::uint32_t>(antichain_.size());
        u.for_each([&](StateId s) { by_state_[s].push_back(id); });
        covered_ |= u;
        antichain_.push_back(std::move(u));
    }
    // Canonical order for export and comparisons.
    std::vector<std::uint32_t> order(antichain_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) {
        return antichain_[x].members() < antichain_[y].members();
    });
    std::vector<BeliefSupport> sorted;
    sorted.reserve(order.size());
    for (auto i : order) sorted.push_back(std::move(antichain_[i]));
    antichain_ = std::move(sorted);
    for (auto& list : by_state_) list.clear();
    for (std::uint32_t i = 0; i < antichain_.size(); ++i)
        antichain_[i].for_each([&](StateId s) { by_state_[s].push_back(i); });
}

bool WinningRegion::contains(const BeliefSupport& u) const {
    if (u.empty() || u.universe() != covered_.universe() || !u.is_subset_of(covered_)) return false;
    // Scan only elements holding u's rarest state.
    const std::vector<std::uint32_t>* best = nullptr;
    u.for_each([&](StateId s) {
        if (!best || by_state_[s].size() < best->size()) best = &by_state_[s];
    });
    for (auto id : *best)
        if (u.is_subset_of(antichain_[id])) return true;
    return false;
}

// ---------------------------------------------------------------------------
// RegionSolver

RegionSolver::RegionSolver(std::shared_ptr<const Pomdp> model, Spec spec, RegionOptions options)
    : spec_(std::move(spec)), options_(options), graph_(std::move(model), spec_.avoid, options) {
    if (spec_.reach.intersects(spec_.avoid)) throw std::invalid_argument("reach and avoid sets must be disjoint");
}

void RegionSolver::add_seeds(const std::vector<BeliefSupport>& seeds) {
    const auto before = graph_.size();
    graph_.add_seeds(seeds);
    if (graph_.size() != before) solved_ = false;
}

void RegionSolver::set_reach(const BeliefSupport& reach) {
    if (reach.intersects(spec_.avoid)) throw std::invalid_argument("reach and avoid sets must be disjoint");
    if (reach == spec_.reach) return;
    spec_.reach = reach;
    solved_ = false;
}

void RegionSolver::check_deadline() const {
    if (past(options_.deadline)) throw RegionTimeout();
}

const std::vector<bool>& RegionSolver::solve() {
    if (solved_) return winning_;
    const auto V = graph_.size();
    const auto A = graph_.model().num_actions();

    std::vector<std::vector<std::pair<std::uint32_t, ActionId>>> preds(V);
    for (std::uint32_t v = 0; v < V; ++v)
        for (const auto& e : graph_.edges(v)) preds[e.target].emplace_back(v, e.action);

    // (1) candidates: supports disjoint from avoid; goals: supports inside reach.
    std::vector<bool> alive(V), goal(V);
    for (std::uint32_t v = 0; v < V; ++v) {
        const auto& u = graph_.vertex(v);
        alive[v] = graph_.expanded(v) && !u.intersects(spec_.avoid);
        goal[v] = alive[v] && u.is_subset_of(spec_.reach);
    }

    // bad[v*A+a] counts a-edges of v leaving the candidate set.
    std::vector<std::uint32_t> bad(V * A, 0), allowed(V, 0);
    for (std::uint32_t v = 0; v < V; ++v) {
        if (!alive[v]) continue;
        for (const auto& e : graph_.edges(v))
            if (!alive[e.target]) ++bad[v * A + e.action];
        for (ActionId a = 0; a < A; ++a)
            if (bad[v * A + a] == 0) ++allowed[v];
    }

    std::vector<std::uint32_t> doomed;
    for (std::uint32_t v = 0; v < V; ++v)
        if (alive[v] && !goal[v] && allowed[v] == 0) doomed.push_back(v);

    auto remove = [&](std::uint32_t v) {
        if (!alive[v]) return;
        alive[v] = false;
        for (auto [u, a] : preds[v]) {
            if (!alive[u]) continue;
            if (bad[u * A + a]++ == 0 && --allowed[u] == 0 && !goal[u]) doomed.push_back(u);
        }
    };

    std::vector<bool> reached(V);
    std::vector<std::uint32_t> stack;
    for (;;) {
        // (2a) drop supports without an action that stays in the candidate set.
        while (!doomed.empty()) {
            const auto v = doomed.back();
            doomed.pop_back();
            remove(v);
        }
        check_deadline();
        // (2b) keep only supports that can reach a goal along allowed edges.
        std::fill(reached.begin(), reached.end(), false);
        stack.clear();
        for (std::uint32_t v = 0; v < V; ++v)
            if (goal[v] && alive[v]) {
                reached[v] = true;
                stack.push_back(v);
            }
        while (!stack.empty()) {
            const auto t = stack.back();
            stack.pop_back();
            for (auto [u, a] : preds[t]) {
                if (!alive[u] || reached[u] || bad[u * A + a] != 0) continue;
                reached[u] = true;
                stack.push_back(u);
            }
        }
        bool changed = false;
        for (std::uint32_t v = 0; v < V; ++v)
            if (alive[v] && !reached[v]) {
                doomed.push_back(v);
                changed = true;
            }
        if (!changed) break;
    }

    winning_ = std::move(alive);
    solved_ = true;
    return winning_;
}

WinningRegion RegionSolver::region() {
    const auto& win = solve();
    std::vector<BeliefSupport> supports;
    for (std::uint32_t v = 0; v < graph_.size(); ++v)
        if (win[v]) supports.push_back(graph_.vertex(v));
    return WinningRegion(graph_.model_ptr(), spec_, std::move(supports));
}

WinningRegion compute_winning_region(std::shared_ptr<const Pomdp> model, const Spec& spec,
                                     const std::vector<BeliefSupport>& seeds, RegionOptions options) {
    RegionSolver solver(std::move(model), spec, options);
    solver.add_seeds(seeds);
    return solver.region();
}

// ---------------------------------------------------------------------------
// Shield queries

std::vector<ActionId> allowed_actions(const WinningRegion& w, const Pomdp& m, const BeliefSupport& u) {
    if (!w.contains(u))
        throw ShieldContractError("allowed_actions called on a support outside the winning region: " +
                                  format_support(m, u));
    std::vector<ActionId> out;
    for (ActionId a = 0; a < m.num_actions(); ++a) {
        const auto branches = support_post_all(m, u, a);
        if (std::all_of(branches.begin(), branches.end(),
                        [&](const SupportBranch& b) { return w.contains(b.support); }))
            out.push_back(a);
    }
    return out;
}

WitnessPath productivity_witness(const WinningRegion& w, const Pomdp& m, const BeliefSupport& u) {
    if (!w.contains(u))
        throw ShieldContractError("productivity_witness called on a non-winning support: " + format_support(m, u));
    struct Node {
        BeliefSupport support;
        std::int64_t parent;
        ActionId action;
        ObservationId observation;
    };
    std::vector<Node> nodes{{u, -1, 0, 0}};
    std::unordered_map<BeliefSupport, std::size_t, BeliefSupportHash> seen{{u, 0}};
    for (std::size_t head = 0; head < nodes.size(); ++head) {
        if (nodes[head].support.is_subset_of(w.spec().reach)) {
            WitnessPath path;
            for (auto i = static_cast<std::int64_t>(head); nodes[i].parent >= 0; i = nodes[i].parent)
                path.emplace_back(nodes[i].action, nodes[i].observation);
            std::reverse(path.begin(), path.end());
            return path;
        }
        const BeliefSupport current = nodes[head].support;
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            const auto branches = support_post_all(m, current, a);
            if (!std::all_of(branches.begin(), branches.end(),
                             [&](const SupportBranch& b) { return w.contains(b.support); }))
                continue;
            for (const auto& b : branches) {
                if (seen.count(b.support)) continue;
                seen.emplace(b.support, nodes.size());
                nodes.push_back({b.support, static_cast<std::int64_t>(head), a, b.observation});
            }
        }
    }
    throw std::logic_error("no productivity witness for winning support " + format_support(m, u) +
                           "; the region is not productive");
}

std::vector<std::string> verify_region(const WinningRegion& w) {
    const auto& m = w.model();
    std::vector<std::string> problems;
    for (const auto& u : w.antichain()) {
        const auto name = format_support(m, u);
        if (u.intersects(w.spec().avoid)) {
            problems.push_back(name + " intersects the avoid set");
            continue;
        }
        if (!u.is_subset_of(w.spec().reach) && allowed_actions(w, m, u).empty()) {
            problems.push_back(name + " has no action that stays in the region");
            continue;
        }
        try {
            productivity_witness(w, m, u);
        } catch (const std::logic_error&) {
            problems.push_back(name + " has no productivity witness");
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Region files

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

void write_region(std::ostream& out, const WinningRegion& w) {
    const auto& m = w.model();
    out << "# safepomcp winning region\n";
    out << "model " << hex64(m.content_hash()) << '\n';
    out << "spec " << hex64(w.spec().hash()) << '\n';
    out << "reach";
    write_names(out, m, w.spec().reach);
    out << "\navoid";
    write_names(out, m, w.spec().avoid);
    out << '\n';
    for (const auto& u : w.antichain()) {
        out << 'W';
        write_names(out, m, u);
        out << '\n';
    }
}

WinningRegion read_region(std::istream& in, std::shared_ptr<const Pomdp> model) {
    const auto& m = *model;
    Spec spec{m.empty_support(), m.empty_support()};
    std::vector<BeliefSupport> elements;
    std::string line, model_hash, spec_hash;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "model") ls >> model_hash;
        else if (kw == "spec") ls >> spec_hash;
        else if (kw == "reach") spec.reach = read_names(ls, m, line_no);
        else if (kw == "avoid") spec.avoid = read_names(ls, m, line_no);
        else if (kw == "W") elements.push_back(read_names(ls, m, line_no));
        else throw std::invalid_argument("region file line " + std::to_string(line_no) + ": unknown keyword " + kw);
    }
    if (model_hash != hex64(m.content_hash()))
        throw std::invalid_argument("region file was computed for a different model (hash " + model_hash + ")");
    if (spec_hash != hex64(spec.hash())) throw std::invalid_argument("region file spec hash mismatch");
    return WinningRegion(std::move(model), std::move(spec), std::move(elements));
}

void save_region(const WinningRegion& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write region file: " + path);
    write_region(out, w);
}

WinningRegion load_region(const std::string& path, std::shared_ptr<const Pomdp> model) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open region file: " + path);
    return read_region(in, std::move(model));
}

}  // namespace safepomcp
