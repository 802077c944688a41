#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace safepomcp {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ObservationId = std::uint32_t;

/// Set of state ids over a fixed universe [0, universe), stored as a dense bitset.
///
/// This is the unit every shield query works on. Equality, hashing and the
/// subset order only look at the members; two supports over different
/// universes are never equal.
class BeliefSupport {
public:
    BeliefSupport() = default;
    explicit BeliefSupport(std::size_t universe)
        : universe_(universe), words_((universe + 63) / 64, 0) {}
    BeliefSupport(std::size_t universe, std::initializer_list<StateId> states)
        : BeliefSupport(universe) {
        for (StateId s : states) insert(s);
    }
    template <typename Range>
    static BeliefSupport from_range(std::size_t universe, const Range& states) {
        BeliefSupport u(universe);
        for (auto s : states) u.insert(static_cast<StateId>(s));
        return u;
    }

    std::size_t universe() const { return universe_; }

    void insert(StateId s) { words_[s >> 6] |= bit(s); }
    void erase(StateId s) { words_[s >> 6] &= ~bit(s); }
    bool contains(StateId s) const {
        return s < universe_ && (words_[s >> 6] & bit(s)) != 0;
    }

    bool empty() const {
        for (auto w : words_)
            if (w) return false;
        return true;
    }
    std::size_t size() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    bool is_subset_of(const BeliefSupport& other) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~other.words_[i]) return false;
        return true;
    }
    bool intersects(const BeliefSupport& other) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & other.words_[i]) return true;
        return false;
    }

    BeliefSupport& operator|=(const BeliefSupport& other) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
        return *this;
    }
    BeliefSupport& operator&=(const BeliefSupport& other) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
        return *this;
    }
    friend BeliefSupport operator|(BeliefSupport a, const BeliefSupport& b) { return a |= b; }
    friend BeliefSupport operator&(BeliefSupport a, const BeliefSupport& b) { return a &= b; }

    friend bool operator==(const BeliefSupport& a, const BeliefSupport& b) {
        return a.universe_ == b.universe_ && a.words_ == b.words_;
    }
    /// Lexicographic on the raw words; only used for deterministic ordering.
    friend bool operator<(const BeliefSupport& a, const BeliefSupport& b) {
        return a.words_ < b.words_;
    }

    /// Calls f(s) for every member in increasing order.
    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                const int b = std::countr_zero(w);
                f(static_cast<StateId>(i * 64 + static_cast<std::size_t>(b)));
                w &= w - 1;
            }
        }
    }
    std::vector<StateId> members() const {
        std::vector<StateId> out;
        out.reserve(size());
        for_each([&](StateId s) { out.push_back(s); });
        return out;
    }
    /// Smallest member; universe() when empty.
    StateId first() const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i]) return static_cast<StateId>(i * 64 + static_cast<std::size_t>(std::countr_zero(words_[i])));
        return static_cast<StateId>(universe_);
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ULL ^ universe_;
        for (auto w : words_) {
            h ^= w;
            h *= 1099511628211ULL;
            h ^= h >> 29;
        }
        return static_cast<std::size_t>(h);
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

private:
    static std::uint64_t bit(StateId s) { return std::uint64_t{1} << (s & 63); }

    std::size_t universe_ = 0;
    std::vector<std::uint64_t> words_;
};

struct BeliefSupportHash {
    std::size_t operator()(const BeliefSupport& u) const { return u.hash(); }
};

}  // namespace safepomcp
