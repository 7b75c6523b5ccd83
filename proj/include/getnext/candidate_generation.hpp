#pragma once

// Candidate generation: a small set of tuples guaranteed to contain the next-ranked tuple.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "getnext/core_db.hpp"
#include "getnext/dominance.hpp"
#include "getnext/state.hpp"

namespace getnext {

struct CandidateBatch {
    /// Tuples proven to be the next consecutive ranks, best first.
    std::vector<Tuple> resolved;
    /// Unordered candidates, one of which is the next-ranked tuple (only when resolved is empty).
    std::vector<Tuple> candidates;
    /// Index into GetNextState::chains of a live chain containing the last top tuple.
    std::optional<std::size_t> source_chain_of_th;
    /// Candidates were narrowed by assuming consecutive ranks are directly comparable, so a
    /// lone survivor is not proof of rank.
    bool assumed_comparable = false;

    bool exhausted() const noexcept { return resolved.empty() && candidates.empty(); }
};

/// Greedy attribute set whose value combinations split `top` into groups smaller than k.
/// Each step adds the attribute minimising the largest group (ties: smaller domain, then lower
/// index). Attributes in `excluded` are never chosen. Empty when |top| < k.
std::vector<AttrIndex> find_partition_attributes(const Schema& schema, std::span<const Tuple> top,
                                                 int k, std::span<const AttrIndex> excluded = {});

/// Every value combination over `attributes`, each conjoined with `base`.
std::vector<Query> expand_partition(const Schema& schema, const Query& base,
                                    std::span<const AttrIndex> attributes);

/// Partition baseline: one query per value combination; candidates are all returned
/// non-top tuples. `attributes` overrides the greedy choice.
CandidateBatch generate_candidates_baseline(QuerySession& session, std::span<const Tuple> top,
                                            std::optional<std::vector<AttrIndex>> attributes = std::nullopt);

struct GenerationOptions {
    /// Compare every head with the last top tuple (records edges only).
    bool compare_with_last = true;
    /// Also drop heads not directly comparable with the last top tuple. This holds whenever
    /// consecutive ranks are directly comparable, which the interface does not guarantee
    /// (k=2 over 101,110,100,111 is a counterexample), so results it produces are never
    /// marked certain.
    bool assume_consecutive_comparable = false;
    /// Compare remaining candidate heads with each other.
    bool compare_heads = true;
    /// Compare candidates with the other chains' non-head members to expose indirect domination.
    bool compare_across_chains = true;
};

/// DAG/chain generation. Refines exhausted chains, then narrows the chain heads by observed
/// domination and direct comparisons. While a single candidate remains it is appended to the
/// pending prefix and resolution continues, up to min(max_resolve, state.lookahead) tuples.
CandidateBatch generate_candidates_dag(GetNextState& state, const GenerationOptions& options = {},
                                       std::size_t max_resolve = static_cast<std::size_t>(-1));

/// Re-partitions every exhausted overflowing chain against the current top set and retires
/// chains whose region is fully inside it. Issues queries only for the re-partitioned regions.
void refresh_chains(GetNextState& state);

/// Distinct heads of live chains, in chain order.
std::vector<Tuple> chain_heads(const GetNextState& state);

}  // namespace getnext
