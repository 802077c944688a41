#include "safepomcp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace safepomcp {

const char* to_string(ModelErrorKind kind) {
    switch (kind) {
        case ModelErrorKind::Syntax: return "syntax error";
        case ModelErrorKind::ProbabilitySum: return "probability-sum violation";
        case ModelErrorKind::DanglingId: return "dangling id";
        case ModelErrorKind::ReachAvoidOverlap: return "reach/avoid overlap";
        case ModelErrorKind::NonAbsorbingReach: return "non-absorbing reach state";
        case ModelErrorKind::AvoidInInitial: return "avoid state in initial belief";
        case ModelErrorKind::Duplicate: return "duplicate entry";
        case ModelErrorKind::Invalid: return "invalid model";
    }
    return "model error";
}

namespace {

std::string located(ModelErrorKind kind, const std::string& message, int line, int column) {
    std::ostringstream os;
    if (line > 0) {
        os << "line " << line;
        if (column > 0) os << ", column " << column;
        os << ": ";
    }
    os << to_string(kind) << ": " << message;
    return os.str();
}

std::string format_number(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

}  // namespace

ModelError::ModelError(ModelErrorKind kind, std::string message, int line, int column)
    : std::runtime_error(located(kind, message, line, column)),
      kind_(kind),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------------------
// Pomdp

std::optional<StateId> Pomdp::find_state(std::string_view name) const {
    auto it = std::find(state_names_.begin(), state_names_.end(), name);
    if (it == state_names_.end()) return std::nullopt;
    return static_cast<StateId>(it - state_names_.begin());
}
std::optional<ActionId> Pomdp::find_action(std::string_view name) const {
    auto it = std::find(action_names_.begin(), action_names_.end(), name);
    if (it == action_names_.end()) return std::nullopt;
    return static_cast<ActionId>(it - action_names_.begin());
}
std::optional<ObservationId> Pomdp::find_observation(std::string_view name) const {
    auto it = std::find(observation_names_.begin(), observation_names_.end(), name);
    if (it == observation_names_.end()) return std::nullopt;
    return static_cast<ObservationId>(it - observation_names_.begin());
}

double Pomdp::transition_prob(StateId s, ActionId a, StateId next) const {
    for (const auto& e : transitions(s, a))
        if (e.id == next) return e.prob;
    return 0.0;
}
double Pomdp::observation_prob(StateId next, ActionId a, ObservationId o) const {
    for (const auto& e : observations(next, a))
        if (e.id == o) return e.prob;
    return 0.0;
}

BeliefSupport Pomdp::initial_support() const {
    BeliefSupport u(num_states());
    for (const auto& e : initial_)
        if (e.prob > kSupportEpsilon) u.insert(e.id);
    return u;
}

const std::string& Pomdp::region_label(StateId s) const {
    static const std::string none;
    return regions_.empty() ? none : regions_.at(s);
}

std::uint64_t Pomdp::content_hash() const {
    const std::string text = serialize_model(*this);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

bool operator==(const Pomdp& a, const Pomdp& b) {
    return a.state_names_ == b.state_names_ && a.action_names_ == b.action_names_ &&
           a.observation_names_ == b.observation_names_ && a.trans_offsets_ == b.trans_offsets_ &&
           a.obs_offsets_ == b.obs_offsets_ && a.trans_ == b.trans_ && a.obs_ == b.obs_ &&
           a.rewards_ == b.rewards_ && a.initial_ == b.initial_ && a.reach_ == b.reach_ &&
           a.avoid_ == b.avoid_ && a.regions_ == b.regions_;
}

// ---------------------------------------------------------------------------
// PomdpBuilder

PomdpBuilder::PomdpBuilder(std::size_t states, std::size_t actions, std::size_t observations)
    : num_states_(states),
      num_actions_(actions),
      num_observations_(observations),
      state_names_(states),
      action_names_(actions),
      observation_names_(observations),
      trans_(states * actions),
      obs_(states * actions),
      rewards_(states * actions, 0.0),
      reward_set_(states * actions, false),
      reach_line_(states, -1),
      avoid_line_(states, -1),
      regions_(states) {
    if (states == 0 || actions == 0 || observations == 0)
        throw ModelError(ModelErrorKind::Invalid, "states, actions and observations must be positive");
}

void PomdpBuilder::check_state(StateId s, int line) const {
    if (s >= num_states_)
        throw ModelError(ModelErrorKind::DanglingId, "state id " + std::to_string(s) + " out of range", line);
}
void PomdpBuilder::check_action(ActionId a, int line) const {
    if (a >= num_actions_)
        throw ModelError(ModelErrorKind::DanglingId, "action id " + std::to_string(a) + " out of range", line);
}
void PomdpBuilder::check_observation(ObservationId o, int line) const {
    if (o >= num_observations_)
        throw ModelError(ModelErrorKind::DanglingId,
                         "observation id " + std::to_string(o) + " out of range", line);
}
void PomdpBuilder::check_prob(double p, int line) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ModelError(ModelErrorKind::ProbabilitySum, "probability " + format_number(p) + " outside [0, 1]",
                         line);
}

namespace {
void check_name(const std::string& name, int line) {
    if (name.empty() || std::any_of(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }))
        throw ModelError(ModelErrorKind::Syntax, "names must be non-empty and contain no whitespace", line);
}
}  // namespace

PomdpBuilder& PomdpBuilder::state_name(StateId s, std::string name) {
    check_state(s, 0);
    check_name(name, 0);
    state_names_[s] = std::move(name);
    return *this;
}
PomdpBuilder& PomdpBuilder::action_name(ActionId a, std::string name) {
    check_action(a, 0);
    check_name(name, 0);
    action_names_[a] = std::move(name);
    return *this;
}
PomdpBuilder& PomdpBuilder::observation_name(ObservationId o, std::string name) {
    check_observation(o, 0);
    check_name(name, 0);
    observation_names_[o] = std::move(name);
    return *this;
}

PomdpBuilder& PomdpBuilder::transition(StateId s, ActionId a, StateId next, double p, int line) {
    check_state(s, line);
    check_action(a, line);
    check_state(next, line);
    check_prob(p, line);
    trans_[s * num_actions_ + a].push_back({next, p, line});
    return *this;
}
PomdpBuilder& PomdpBuilder::observation(StateId next, ActionId a, ObservationId o, double p, int line) {
    check_state(next, line);
    check_action(a, line);
    check_observation(o, line);
    check_prob(p, line);
    obs_[next * num_actions_ + a].push_back({o, p, line});
    return *this;
}
PomdpBuilder& PomdpBuilder::reward(StateId s, ActionId a, double r, int line) {
    check_state(s, line);
    check_action(a, line);
    if (!std::isfinite(r)) throw ModelError(ModelErrorKind::Invalid, "reward must be finite", line);
    const auto row = s * num_actions_ + a;
    if (reward_set_[row])
        throw ModelError(ModelErrorKind::Duplicate,
                         "reward for (" + std::to_string(s) + ", " + std::to_string(a) + ") given twice", line);
    reward_set_[row] = true;
    rewards_[row] = r;
    return *this;
}
PomdpBuilder& PomdpBuilder::initial(StateId s, double p, int line) {
    check_state(s, line);
    check_prob(p, line);
    initial_.push_back({s, p, line});
    return *this;
}
PomdpBuilder& PomdpBuilder::reach(StateId s, int line) {
    check_state(s, line);
    reach_line_[s] = line;
    return *this;
}
PomdpBuilder& PomdpBuilder::avoid(StateId s, int line) {
    check_state(s, line);
    avoid_line_[s] = line;
    return *this;
}
PomdpBuilder& PomdpBuilder::region(StateId s, std::string label, int line) {
    check_state(s, line);
    check_name(label, line);
    regions_[s] = std::move(label);
    any_region_ = true;
    return *this;
}

namespace {

template <typename Entry>
std::vector<Outcome> normalize_row(std::vector<Entry>& row, const std::string& what) {
    std::sort(row.begin(), row.end(), [](const Entry& x, const Entry& y) { return x.target < y.target; });
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i].target == row[i - 1].target)
            throw ModelError(ModelErrorKind::Duplicate, what + ": target " + std::to_string(row[i].target) +
                                                            " listed twice",
                             row[i].line);
    double sum = 0.0;
    for (const auto& e : row) sum += e.prob;
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        const int line = row.empty() ? 0 : row.front().line;
        throw ModelError(ModelErrorKind::ProbabilitySum, what + " sums to " + format_number(sum), line);
    }
    std::vector<Outcome> out;
    out.reserve(row.size());
    for (const auto& e : row) out.push_back({e.target, e.prob});
    return out;
}

void append_cdf(const std::vector<Outcome>& row, std::vector<double>& cdf) {
    double acc = 0.0;
    for (const auto& e : row) {
        acc += e.prob;
        cdf.push_back(acc);
    }
}

}  // namespace

Pomdp PomdpBuilder::build(const BuildOptions& options) && {
    Pomdp m;
    const auto S = num_states_, A = num_actions_, O = num_observations_;

    auto default_names = [](std::vector<std::string>& names, char prefix) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i].empty()) names[i] = prefix + std::to_string(i);
    };
    default_names(state_names_, 's');
    default_names(action_names_, 'a');
    default_names(observation_names_, 'o');

    m.reach_ = BeliefSupport(S);
    m.avoid_ = BeliefSupport(S);
    for (StateId s = 0; s < S; ++s) {
        if (reach_line_[s] >= 0) m.reach_.insert(s);
        if (avoid_line_[s] >= 0) m.avoid_.insert(s);
        if (reach_line_[s] >= 0 && avoid_line_[s] >= 0)
            throw ModelError(ModelErrorKind::ReachAvoidOverlap,
                             "state " + state_names_[s] + " is both reach and avoid", avoid_line_[s]);
    }

    // Reach states are terminal successes; make them absorbing.
    for (StateId s = 0; s < S; ++s) {
        if (reach_line_[s] < 0) continue;
        for (ActionId a = 0; a < A; ++a) {
            auto& row = trans_[s * A + a];
            double self = 0.0;
            for (const auto& e : row)
                if (e.target == s) self += e.prob;
            if (std::abs(self - 1.0) <= kProbabilityTolerance && row.size() == 1) continue;
            if (options.reach_policy == ReachPolicy::Reject)
                throw ModelError(ModelErrorKind::NonAbsorbingReach,
                                 "reach state " + state_names_[s] + " is not absorbing under action " +
                                     action_names_[a],
                                 row.empty() ? reach_line_[s] : row.front().line);
            m.warnings_.push_back("reach state " + state_names_[s] + " made absorbing under action " +
                                  action_names_[a]);
            row.assign(1, Entry{s, 1.0, reach_line_[s]});
        }
    }

    m.trans_offsets_.assign(1, 0);
    m.obs_offsets_.assign(1, 0);
    for (StateId s = 0; s < S; ++s) {
        for (ActionId a = 0; a < A; ++a) {
            const auto row = s * A + a;
            auto t = normalize_row(trans_[row], "T(" + state_names_[s] + ", " + action_names_[a] + ")");
            append_cdf(t, m.trans_cum_);
            m.trans_.insert(m.trans_.end(), t.begin(), t.end());
            m.trans_offsets_.push_back(m.trans_.size());

            auto z = normalize_row(obs_[row], "Z(" + state_names_[s] + ", " + action_names_[a] + ")");
            append_cdf(z, m.obs_cum_);
            m.obs_.insert(m.obs_.end(), z.begin(), z.end());
            m.obs_offsets_.push_back(m.obs_.size());
        }
    }

    if (!initial_.empty() || options.require_initial) {
        m.initial_ = normalize_row(initial_, "initial belief");
        append_cdf(m.initial_, m.initial_cum_);
    }
    for (const auto& e : m.initial_)
        if (e.prob > kSupportEpsilon && m.avoid_.contains(e.id))
            throw ModelError(ModelErrorKind::AvoidInInitial,
                             "initial belief puts mass on avoid state " + state_names_[e.id]);

    if (any_region_) {
        for (StateId s = 0; s < S; ++s)
            if (regions_[s].empty())
                throw ModelError(ModelErrorKind::Invalid, "state " + state_names_[s] + " has no region label");
        m.regions_ = std::move(regions_);
    }

    m.rewards_ = std::move(rewards_);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double r : m.rewards_) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    m.reward_span_ = hi - lo > 0.0 ? hi - lo : 1.0;

    m.state_names_ = std::move(state_names_);
    m.action_names_ = std::move(action_names_);
    m.observation_names_ = std::move(observation_names_);

    m.terminal_.assign(S, false);
    for (StateId s = 0; s < S; ++s) {
        bool terminal = true;
        for (ActionId a = 0; a < A && terminal; ++a) {
            const auto t = m.transitions(s, a);
            terminal = t.size() == 1 && t[0].id == s && m.reward(s, a) == 0.0;
        }
        m.terminal_[s] = terminal;
    }
    (void)O;
    return m;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct Token {
    std::string_view text;
    int column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size() || line[i] == '#') break;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start + 1)});
    }
    return out;
}

class Parser {
public:
    explicit Parser(const BuildOptions& options) : options_(options) {}

    Pomdp run(std::string_view text) {
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(pos, end - pos);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            ++line_no;
            handle(tokenize(line), line_no);
            if (end == text.size()) break;
            pos = end + 1;
        }
        if (!builder_) ensure_builder(Token{"", 0}, line_no);
        for (auto& [s, name] : state_names_) builder_->state_name(s, name);
        for (auto& [a, name] : action_names_) builder_->action_name(a, name);
        for (auto& [o, name] : observation_names_) builder_->observation_name(o, name);
        return std::move(*builder_).build(options_);
    }

private:
    [[noreturn]] void syntax(const std::string& message, int line, int column) const {
        throw ModelError(ModelErrorKind::Syntax, message, line, column);
    }

    void expect_arity(const std::vector<Token>& t, std::size_t n, int line) const {
        if (t.size() != n)
            syntax("'" + std::string(t[0].text) + "' expects " + std::to_string(n - 1) + " arguments, got " +
                       std::to_string(t.size() - 1),
                   line, t[0].column);
    }

    std::size_t parse_count(const Token& tok, int line) const {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        if (ec != std::errc() || p != tok.text.data() + tok.text.size() || v == 0)
            syntax("expected a positive integer, got '" + std::string(tok.text) + "'", line, tok.column);
        return v;
    }

    double parse_real(const Token& tok, int line) const {
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        if (ec != std::errc() || p != tok.text.data() + tok.text.size())
            syntax("expected a number, got '" + std::string(tok.text) + "'", line, tok.column);
        return v;
    }

    std::uint32_t parse_id(const Token& tok, int line, std::size_t count,
                           const std::unordered_map<std::string, std::uint32_t>& names, const char* what) const {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        if (ec == std::errc() && p == tok.text.data() + tok.text.size()) {
            if (v >= count)
                throw ModelError(ModelErrorKind::DanglingId,
                                 std::string(what) + " id " + std::string(tok.text) + " out of range", line,
                                 tok.column);
            return static_cast<std::uint32_t>(v);
        }
        auto it = names.find(std::string(tok.text));
        if (it == names.end())
            throw ModelError(ModelErrorKind::DanglingId,
                             std::string("unknown ") + what + " '" + std::string(tok.text) + "'", line, tok.column);
        return it->second;
    }

    StateId state(const Token& tok, int line) const {
        return parse_id(tok, line, num_states_, state_index_, "state");
    }
    ActionId action(const Token& tok, int line) const {
        return parse_id(tok, line, num_actions_, action_index_, "action");
    }
    ObservationId observation(const Token& tok, int line) const {
        return parse_id(tok, line, num_observations_, observation_index_, "observation");
    }

    void ensure_builder(const Token& tok, int line) {
        if (builder_) return;
        if (num_states_ == 0 || num_actions_ == 0 || num_observations_ == 0)
            syntax("'states:', 'actions:' and 'observations:' headers must precede model rows", line, tok.column);
        builder_.emplace(num_states_, num_actions_, num_observations_);
    }

    void name_entry(const std::vector<Token>& t, int line, std::size_t count,
                    std::unordered_map<std::string, std::uint32_t>& index,
                    std::vector<std::pair<std::uint32_t, std::string>>& names, const char* what) {
        expect_arity(t, 3, line);
        if (count == 0) syntax(std::string("'") + what + "' line before its count header", line, t[0].column);
        const auto id = parse_id(t[1], line, count, {}, what);
        std::string name(t[2].text);
        if (!index.emplace(name, id).second)
            throw ModelError(ModelErrorKind::Duplicate, std::string(what) + " name '" + name + "' used twice", line,
                             t[2].column);
        names.emplace_back(id, std::move(name));
    }

    void header(const std::vector<Token>& t, int line, std::size_t& slot) {
        expect_arity(t, 2, line);
        if (builder_) syntax("count headers must precede model rows", line, t[0].column);
        if (slot != 0) throw ModelError(ModelErrorKind::Duplicate, "header given twice", line, t[0].column);
        slot = parse_count(t[1], line);
    }

    void handle(const std::vector<Token>& t, int line) {
        if (t.empty()) return;
        const auto kw = t[0].text;
        if (kw == "states:") return header(t, line, num_states_);
        if (kw == "actions:") return header(t, line, num_actions_);
        if (kw == "observations:") return header(t, line, num_observations_);
        if (kw == "state") return name_entry(t, line, num_states_, state_index_, state_names_, "state");
        if (kw == "action") return name_entry(t, line, num_actions_, action_index_, action_names_, "action");
        if (kw == "observation")
            return name_entry(t, line, num_observations_, observation_index_, observation_names_, "observation");

        if (kw == "T") {
            expect_arity(t, 5, line);
            ensure_builder(t[0], line);
            builder_->transition(state(t[1], line), action(t[2], line), state(t[3], line), parse_real(t[4], line),
                                 line);
        } else if (kw == "Z") {
            expect_arity(t, 5, line);
            ensure_builder(t[0], line);
            builder_->observation(state(t[1], line), action(t[2], line), observation(t[3], line),
                                  parse_real(t[4], line), line);
        } else if (kw == "R") {
            expect_arity(t, 4, line);
            ensure_builder(t[0], line);
            builder_->reward(state(t[1], line), action(t[2], line), parse_real(t[3], line), line);
        } else if (kw == "init") {
            expect_arity(t, 3, line);
            ensure_builder(t[0], line);
            builder_->initial(state(t[1], line), parse_real(t[2], line), line);
        } else if (kw == "reach") {
            expect_arity(t, 2, line);
            ensure_builder(t[0], line);
            builder_->reach(state(t[1], line), line);
        } else if (kw == "avoid") {
            expect_arity(t, 2, line);
            ensure_builder(t[0], line);
            builder_->avoid(state(t[1], line), line);
        } else if (kw == "region") {
            expect_arity(t, 3, line);
            ensure_builder(t[0], line);
            builder_->region(state(t[1], line), std::string(t[2].text), line);
        } else {
            syntax("unknown keyword '" + std::string(kw) + "'", line, t[0].column);
        }
    }

    BuildOptions options_;
    std::size_t num_states_ = 0, num_actions_ = 0, num_observations_ = 0;
    std::unordered_map<std::string, std::uint32_t> state_index_, action_index_, observation_index_;
    std::vector<std::pair<std::uint32_t, std::string>> state_names_, action_names_, observation_names_;
    std::optional<PomdpBuilder> builder_;
};

}  // namespace

Pomdp parse_model(std::string_view text, const BuildOptions& options) {
    return Parser(options).run(text);
}

Pomdp load_model(const std::string& path, const BuildOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str(), options);
}

std::string serialize_model(const Pomdp& m) {
    std::ostringstream os;
    const auto S = m.num_states(), A = m.num_actions(), O = m.num_observations();
    os << "states: " << S << "\nactions: " << A << "\nobservations: " << O << "\n";
    for (StateId s = 0; s < S; ++s) os << "state " << s << ' ' << m.state_name(s) << '\n';
    for (ActionId a = 0; a < A; ++a) os << "action " << a << ' ' << m.action_name(a) << '\n';
    for (ObservationId o = 0; o < O; ++o) os << "observation " << o << ' ' << m.observation_name(o) << '\n';
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a)
            for (const auto& e : m.transitions(s, a))
                os << "T " << s << ' ' << a << ' ' << e.id << ' ' << format_number(e.prob) << '\n';
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a)
            for (const auto& e : m.observations(s, a))
                os << "Z " << s << ' ' << a << ' ' << e.id << ' ' << format_number(e.prob) << '\n';
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a)
            if (m.reward(s, a) != 0.0) os << "R " << s << ' ' << a << ' ' << format_number(m.reward(s, a)) << '\n';
    for (const auto& e : m.initial_belief()) os << "init " << e.id << ' ' << format_number(e.prob) << '\n';
    m.reach().for_each([&](StateId s) { os << "reach " << s << '\n'; });
    m.avoid().for_each([&](StateId s) { os << "avoid " << s << '\n'; });
    if (m.has_partition())
        for (StateId s = 0; s < S; ++s) os << "region " << s << ' ' << m.region_label(s) << '\n';
    return os.str();
}

void save_model(const Pomdp& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << serialize_model(m);
}

// ---------------------------------------------------------------------------
// Support algebra

BeliefSupport successors(const Pomdp& m, const BeliefSupport& u, ActionId a) {
    BeliefSupport out(m.num_states());
    u.for_each([&](StateId s) {
        for (const auto& e : m.transitions(s, a))
            if (e.prob > kSupportEpsilon) out.insert(e.id);
    });
    return out;
}

BeliefSupport support_post(const Pomdp& m, const BeliefSupport& u, ActionId a, ObservationId o) {
    BeliefSupport out(m.num_states());
    successors(m, u, a).for_each([&](StateId next) {
        if (m.observation_prob(next, a, o) > kSupportEpsilon) out.insert(next);
    });
    return out;
}

std::vector<SupportBranch> support_post_all(const Pomdp& m, const BeliefSupport& u, ActionId a) {
    std::vector<SupportBranch> branches;
    successors(m, u, a).for_each([&](StateId next) {
        for (const auto& e : m.observations(next, a)) {
            if (e.prob <= kSupportEpsilon) continue;
            auto it = std::find_if(branches.begin(), branches.end(),
                                   [&](const SupportBranch& b) { return b.observation == e.id; });
            if (it == branches.end()) {
                branches.push_back({e.id, BeliefSupport(m.num_states())});
                it = std::prev(branches.end());
            }
            it->support.insert(next);
        }
    });
    std::sort(branches.begin(), branches.end(),
              [](const SupportBranch& x, const SupportBranch& y) { return x.observation < y.observation; });
    return branches;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {
std::uint32_t draw(std::span<const Outcome> row, std::span<const double> cdf, Rng& rng) {
    const double x = uniform01(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), row.size() - 1);
    return row[idx].id;
}
}  // namespace

StateId sample_next_state(const Pomdp& m, StateId s, ActionId a, Rng& rng) {
    return draw(m.transitions(s, a), m.transition_cdf(s, a), rng);
}
ObservationId sample_observation(const Pomdp& m, StateId next, ActionId a, Rng& rng) {
    return draw(m.observations(next, a), m.observation_cdf(next, a), rng);
}
StateId sample_initial_state(const Pomdp& m, Rng& rng) {
    if (m.initial_belief().empty()) throw std::logic_error("model has no initial belief");
    return draw(m.initial_belief(), m.initial_cdf(), rng);
}

SimStep sample_step(const Pomdp& m, StateId s, ActionId a, Rng& rng) {
    const StateId next = sample_next_state(m, s, a, rng);
    const ObservationId o = sample_observation(m, next, a, rng);
    return {next, o, m.reward(s, a)};
}

std::string format_support(const Pomdp& m, const BeliefSupport& u) {
    std::string out = "{";
    bool first = true;
    u.for_each([&](StateId s) {
        if (!first) out += ", ";
        out += m.state_name(s);
        first = false;
    });
    return out + "}";
}

BeliefSupport support_of(const Pomdp& m, std::initializer_list<std::string_view> names) {
    BeliefSupport u(m.num_states());
    for (auto name : names) {
        auto s = m.find_state(name);
        if (!s) throw std::invalid_argument("unknown state name: " + std::string(name));
        u.insert(*s);
    }
    return u;
}

}  // namespace safepomcp
