#pragma once

// Candidate testing: deciding whether a candidate has rank h+1 with the beyond-h minimal
// queries, which are in one-to-one correspondence with the minimal infrequent itemsets of the
// candidate's agreement transactions over the top-h tuples.

#include <cstdint>
#include <span>
#include <vector>

#include "getnext/core_db.hpp"
#include "getnext/dominance.hpp"

namespace getnext {

/// Attribute set as a bit mask; bit i stands for attribute i. Limits itemset work to m <= 64.
using ItemSet = std::uint64_t;

inline constexpr std::size_t kMaxItems = 64;

struct Transaction {
    ItemSet items = 0;      // attributes on which the source tuple agrees with the candidate
    std::size_t source = 0; // index of the source tuple within top-h
};

std::vector<Transaction> build_transactions(std::span<const Tuple> top, const Tuple& candidate);

/// Number of transactions containing every item of `items`.
std::size_t support(std::span<const Transaction> transactions, ItemSet items);

/// Itemsets with support < k whose proper subsets all have support >= k, enumerated levelwise
/// (apriori join, pruned at supersets of infrequent sets) up to `max_level` items.
/// Requires |transactions| >= k. Result is sorted by (size, mask).
std::vector<ItemSet> minimal_infrequent_itemsets(std::span<const Transaction> transactions,
                                                 std::size_t num_items, int k, std::size_t max_level);
/// Same, with the level cap min(h - k + 1, num_items).
std::vector<ItemSet> minimal_infrequent_itemsets(std::span<const Transaction> transactions,
                                                 std::size_t num_items, int k);

struct BeyondHQuery {
    Query query;
    ItemSet attribute_set = 0;
    /// Candidates satisfying every predicate of the query.
    std::vector<TupleId> matched_candidates;
    /// Candidates that own this query as one of their beyond-h queries.
    std::vector<TupleId> owners;
    double score = 0.0;
};

/// One query per minimal infrequent itemset, predicates fixed to the candidate's values.
std::vector<BeyondHQuery> beyond_h_queries(std::span<const Tuple> top, const Tuple& candidate, int k);

/// Executes the candidate's beyond-h queries (cached ones are free) and returns false as soon as
/// one reveals a non-top tuple ranked above the candidate. A candidate already known to be
/// dominated by a non-top tuple is rejected without queries.
bool test_candidate(QuerySession& session, std::span<const Tuple> top, const Tuple& candidate);

struct QueryWeights {
    double candidates = 1.0;   // share of the candidate set the query matches
    double selectivity = 1.0;  // expected fraction of the database it matches
};

/// Expected match fraction under uniformly distributed attribute values.
double expected_match_fraction(const Schema& schema, const Query& q);

/// Sorts by w1 * |matched| / num_candidates + w2 * expected fraction, descending; ties go to
/// fewer predicates, then lower attribute indices, then lower values.
std::vector<BeyondHQuery> order_queries(std::vector<BeyondHQuery> pool, const Schema& schema,
                                        std::size_t num_candidates, const QueryWeights& weights = {});

/// Test oracle: crawl the whole database by recursive partitioning of overflowing queries.
/// Returns the tuples in a topological order of the observed dominance (ties by id).
std::vector<Tuple> crawl_all(QuerySession& session);

/// Test oracle: issue all 2^m queries matching the candidate in increasing predicate count.
bool exhaustive_test(QuerySession& session, std::span<const Tuple> top, const Tuple& candidate);

}  // namespace getnext
