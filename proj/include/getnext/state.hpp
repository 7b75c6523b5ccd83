#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <unordered_set>
#include <vector>

#include "getnext/core_db.hpp"
#include "getnext/dominance.hpp"

namespace getnext {

/// A query whose rank-ordered result serves as one linear chain of the candidate cover.
/// Live chains partition the database domain; the head of a chain is its best member
/// outside the current top-h.
struct CoverChain {
    Query query;
    ResultStatus status = ResultStatus::Underflow;
    std::vector<TupleId> members;
    bool retired = false;
};

struct PendingTuple {
    Tuple tuple;
    bool certain = true;
};

/// Extraction cursor: verified prefix, proven-but-unemitted tuples, cover chains and the
/// session that owns the query cache and dominance graph.
class GetNextState {
public:
    GetNextState(TopKSource& source, std::uint64_t seed)
        : session(source), rng(seed), seed_(seed) {}

    GetNextState(const GetNextState&) = delete;
    GetNextState& operator=(const GetNextState&) = delete;

    QuerySession session;

    std::vector<Tuple> verified;
    std::vector<bool> certain;
    std::deque<PendingTuple> pending_resolved;
    std::vector<CoverChain> chains;
    std::mt19937_64 rng;

    /// Upper bound on tuples one candidate-generation round may resolve.
    std::size_t lookahead = std::numeric_limits<std::size_t>::max();

    bool bootstrapped = false;

    std::uint64_t seed() const noexcept { return seed_; }

    /// Verified tuples followed by pending ones: everything known to rank above the next tuple.
    std::vector<Tuple> top() const;
    bool in_top(TupleId id) const { return top_ids_.count(id) != 0; }
    std::size_t top_size() const noexcept { return top_ids_.size(); }

    /// Certainty of the lowest-ranked tuple of top(); true for an empty prefix.
    bool last_certain() const;

    /// True when some tuple outside top() is known to dominate `id`.
    bool dominated_outside_top(TupleId id) const;

    void push_pending(const Tuple& t, bool is_certain);
    void push_verified(const Tuple& t, bool is_certain);
    /// Moves the front pending tuple into the verified prefix and returns it.
    Tuple promote_pending();

private:
    std::uint64_t seed_;
    std::unordered_set<TupleId> top_ids_;
};

}  // namespace getnext
