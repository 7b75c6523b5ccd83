#pragma once

// Pairwise rank comparison through the top-k interface and the dominance DAG
// that accumulates every ordering fact observed in query results.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "getnext/core_db.hpp"

namespace getnext {

enum class ComparisonOutcome { FirstDominates, SecondDominates, Incomparable };

/// Conjunction of `A = t[A]` over exactly the attributes on which t and u agree.
Query most_specific_query(const Tuple& t, const Tuple& u);

/// Directed acyclic graph of observed direct dominations (u -> v means u ranks above v).
///
/// A topological order is maintained incrementally (Pearce-Kelly), so inserting an edge that
/// agrees with the current order is O(1) and a cycle is detected at insertion time.
/// Reachability answers are memoised until the next edge insertion.
class DominanceGraph {
public:
    using ChainId = std::size_t;

    void add_node(TupleId id);
    bool contains(TupleId id) const { return index_.count(id) != 0; }

    /// Records u > v. Throws InconsistentRankingError when v already reaches u.
    void add_edge(TupleId u, TupleId v);
    bool has_edge(TupleId u, TupleId v) const;

    /// True iff v is reachable from u (direct or indirect domination).
    bool dominates(TupleId u, TupleId v) const;

    /// Records a rank-ordered query result as a linear chain and inserts every pairwise edge.
    ChainId add_result_edges(std::span<const TupleId> ranked);

    const std::vector<std::vector<TupleId>>& chains() const noexcept { return chains_; }

    std::vector<TupleId> predecessors(TupleId id) const;
    std::vector<TupleId> successors(TupleId id) const;

    std::size_t node_count() const noexcept { return ids_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Node ids in insertion order.
    const std::vector<TupleId>& nodes() const noexcept { return ids_; }

    /// Nodes sorted by the maintained topological order.
    std::vector<TupleId> topological_order() const;

    /// Graphviz export: node label = tuple id, edge = domination.
    std::string to_dot() const;

private:
    std::size_t node_index(TupleId id) const;
    static std::uint64_t edge_key(std::size_t u, std::size_t v) noexcept {
        return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
    }
    void reorder(std::size_t u, std::size_t v);

    std::unordered_map<TupleId, std::size_t> index_;
    std::vector<TupleId> ids_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::vector<std::size_t>> in_;
    std::vector<std::size_t> ord_;
    std::unordered_set<std::uint64_t> edges_;
    std::vector<std::vector<TupleId>> chains_;
    mutable std::unordered_map<std::uint64_t, bool> reach_memo_;
};

/// Which counter an issued query is charged to.
enum class Phase { Generation, Testing };

/// One extraction session's view of the hidden database.
///
/// Every query goes through `run`, which answers repeated queries from a cache, charges new ones
/// to the current phase and folds the result into the dominance graph: pairwise order inside the
/// result, plus "returned beats matching-but-not-returned" for every known tuple of an overflowing
/// query (including tuples discovered only later).
class QuerySession {
public:
    explicit QuerySession(TopKSource& source);

    QuerySession(const QuerySession&) = delete;
    QuerySession& operator=(const QuerySession&) = delete;

    const Schema& schema() const { return source_.schema(); }
    int k() const { return source_.k(); }
    TopKSource& source() noexcept { return source_; }

    const QueryResult& run(const Query& q);
    const QueryResult* cached(const Query& q) const;

    /// compare_direct: one most-specific query per unordered pair at most, memoised.
    ComparisonOutcome compare(const Tuple& t, const Tuple& u);
    /// Outcome derivable without issuing a query, if any.
    std::optional<ComparisonOutcome> known_comparison(const Tuple& t, const Tuple& u) const;

    DominanceGraph& graph() noexcept { return graph_; }
    const DominanceGraph& graph() const noexcept { return graph_; }

    bool knows(TupleId id) const { return known_.count(id) != 0; }
    const Tuple& tuple(TupleId id) const;
    void learn(const Tuple& t);

    void set_phase(Phase p) noexcept { phase_ = p; }
    Phase phase() const noexcept { return phase_; }
    std::int64_t issued(Phase p) const noexcept {
        return p == Phase::Generation ? issued_generation_ : issued_testing_;
    }
    std::int64_t issued_total() const noexcept { return issued_generation_ + issued_testing_; }

    std::size_t cache_size() const noexcept { return cache_.size(); }

private:
    static std::uint64_t pair_key(TupleId a, TupleId b) noexcept;
    void ingest(const Query& q, const QueryResult& r);

    TopKSource& source_;
    DominanceGraph graph_;
    std::map<Query, QueryResult> cache_;
    std::vector<const std::pair<const Query, QueryResult>*> overflowing_;
    std::unordered_map<TupleId, Tuple> known_;
    std::vector<TupleId> known_order_;
    std::unordered_map<std::uint64_t, ComparisonOutcome> comparisons_;
    Phase phase_ = Phase::Generation;
    std::int64_t issued_generation_ = 0;
    std::int64_t issued_testing_ = 0;
};

inline ComparisonOutcome compare_direct(QuerySession& session, const Tuple& t, const Tuple& u) {
    return session.compare(t, u);
}

}  // namespace getnext
