#include "getnext/candidate_generation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace getnext {

namespace {

using GroupKey = std::vector<Value>;

std::map<GroupKey, std::size_t> group_sizes(std::span<const Tuple> top, std::span<const AttrIndex> attrs) {
    std::map<GroupKey, std::size_t> groups;
    GroupKey key(attrs.size());
    for (const auto& t : top) {
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            key[i] = t.values[attrs[i]];
        }
        ++groups[key];
    }
    return groups;
}

std::size_t largest(const std::map<GroupKey, std::size_t>& groups) {
    std::size_t best = 0;
    for (const auto& [key, size] : groups) {
        best = std::max(best, size);
    }
    return best;
}

}  // namespace

std::vector<AttrIndex> find_partition_attributes(const Schema& schema, std::span<const Tuple> top, int k,
                                                 std::span<const AttrIndex> excluded) {
    std::vector<AttrIndex> chosen;
    const auto limit = static_cast<std::size_t>(k);
    auto current = group_sizes(top, chosen);
    while (largest(current) >= limit) {
        std::optional<AttrIndex> best;
        std::size_t best_largest = 0;
        bool best_splits = false;
        for (AttrIndex a = 0; a < schema.size(); ++a) {
            if (std::find(chosen.begin(), chosen.end(), a) != chosen.end() ||
                std::find(excluded.begin(), excluded.end(), a) != excluded.end()) {
                continue;
            }
            auto trial = chosen;
            trial.push_back(a);
            const auto groups = group_sizes(top, trial);
            const auto worst = largest(groups);
            // An attribute that leaves every group intact only multiplies the fan-out.
            const bool splits = groups.size() > current.size();
            const bool better = !best || (splits && !best_splits) ||
                                (splits == best_splits &&
                                 (worst < best_largest ||
                                  (worst == best_largest && schema.domain_size(a) < schema.domain_size(*best))));
            if (better) {
                best = a;
                best_largest = worst;
                best_splits = splits;
            }
        }
        if (!best) {
            throw std::logic_error("top tuples cannot be partitioned below k; are they distinct?");
        }
        chosen.push_back(*best);
        current = group_sizes(top, chosen);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<Query> expand_partition(const Schema& schema, const Query& base, std::span<const AttrIndex> attributes) {
    std::vector<Query> out;
    std::vector<Value> digits(attributes.size(), 0);
    while (true) {
        Query q = base;
        for (std::size_t i = 0; i < attributes.size(); ++i) {
            q.set(attributes[i], digits[i]);
        }
        out.push_back(std::move(q));
        std::size_t pos = attributes.size();
        while (pos > 0) {
            --pos;
            if (static_cast<std::size_t>(++digits[pos]) < schema.domain_size(attributes[pos])) {
                break;
            }
            digits[pos] = 0;
            if (pos == 0) {
                return out;
            }
        }
        if (attributes.empty()) {
            return out;
        }
    }
}

CandidateBatch generate_candidates_baseline(QuerySession& session, std::span<const Tuple> top,
                                            std::optional<std::vector<AttrIndex>> attributes) {
    const auto& schema = session.schema();
    const auto attrs = attributes ? *attributes : find_partition_attributes(schema, top, session.k());
    std::unordered_set<TupleId> top_ids;
    for (const auto& t : top) {
        top_ids.insert(t.id);
    }

    CandidateBatch batch;
    std::unordered_set<TupleId> seen;
    for (const auto& q : expand_partition(schema, Query::select_all(schema.size()), attrs)) {
        const auto& r = session.run(q);
        for (const auto& t : r.tuples) {
            if (top_ids.count(t.id) == 0 && seen.insert(t.id).second) {
                batch.candidates.push_back(t);
            }
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------

void refresh_chains(GetNextState& state) {
    auto& session = state.session;
    const auto& schema = session.schema();
    for (std::size_t i = 0; i < state.chains.size(); ++i) {
        if (state.chains[i].retired) {
            continue;
        }
        const auto& members = state.chains[i].members;
        const bool live = std::any_of(members.begin(), members.end(),
                                      [&](TupleId id) { return !state.in_top(id); });
        if (live) {
            continue;
        }
        state.chains[i].retired = true;
        if (state.chains[i].status != ResultStatus::Overflow) {
            continue;
        }

        const Query base = state.chains[i].query;
        std::vector<Tuple> region_top;
        for (const auto& t : state.top()) {
            if (base.matches(t)) {
                region_top.push_back(t);
            }
        }
        const auto fixed = base.attributes();
        const auto attrs = find_partition_attributes(schema, region_top, session.k(), fixed);
        if (attrs.empty()) {
            throw InconsistentRankingError("exhausted chain for '" + base.to_string(schema) +
                                           "' overflowed with fewer than k top tuples");
        }
        for (auto& q : expand_partition(schema, base, attrs)) {
            const auto& r = session.run(q);
            CoverChain chain{q, r.status, {}, false};
            for (const auto& t : r.tuples) {
                chain.members.push_back(t.id);
            }
            state.chains.push_back(std::move(chain));
        }
    }
}

std::vector<Tuple> chain_heads(const GetNextState& state) {
    std::vector<Tuple> heads;
    std::unordered_set<TupleId> seen;
    for (const auto& chain : state.chains) {
        if (chain.retired) {
            continue;
        }
        for (auto id : chain.members) {
            if (state.in_top(id)) {
                continue;
            }
            if (seen.insert(id).second) {
                heads.push_back(state.session.tuple(id));
            }
            break;
        }
    }
    return heads;
}

namespace {

void drop_dominated(const GetNextState& state, std::vector<Tuple>& cands) {
    std::erase_if(cands, [&](const Tuple& c) { return state.dominated_outside_top(c.id); });
}

}  // namespace

CandidateBatch generate_candidates_dag(GetNextState& state, const GenerationOptions& options,
                                       std::size_t max_resolve) {
    auto& session = state.session;
    session.set_phase(Phase::Generation);
    const auto limit = std::min(max_resolve, state.lookahead);

    CandidateBatch batch;
    while (batch.resolved.size() < limit) {
        refresh_chains(state);
        auto cands = chain_heads(state);
        if (cands.empty()) {
            break;
        }
        drop_dominated(state, cands);
        if (cands.empty()) {
            throw InconsistentRankingError("every chain head is dominated by a non-top tuple");
        }

        const auto top = state.top();
        if (cands.size() > 1 && options.compare_with_last && !top.empty()) {
            const auto& last = top.back();
            std::vector<Tuple> comparable;
            for (const auto& c : cands) {
                const auto outcome = session.compare(last, c);
                if (outcome == ComparisonOutcome::SecondDominates && state.last_certain()) {
                    throw InconsistentRankingError("tuple " + std::to_string(c.id) +
                                                   " outranks a tuple of certain rank");
                }
                if (outcome == ComparisonOutcome::FirstDominates) {
                    comparable.push_back(c);
                }
            }
            drop_dominated(state, cands);
            drop_dominated(state, comparable);
            if (options.assume_consecutive_comparable && !comparable.empty() &&
                comparable.size() < cands.size()) {
                cands = std::move(comparable);
                batch.assumed_comparable = true;
            }
        }

        if (cands.size() > 1 && options.compare_heads) {
            for (std::size_t i = 0; i < cands.size(); ++i) {
                for (std::size_t j = i + 1; j < cands.size(); ++j) {
                    session.compare(cands[i], cands[j]);
                }
            }
            drop_dominated(state, cands);
        }

        if (cands.size() > 1 && options.compare_across_chains) {
            std::unordered_set<TupleId> cand_ids;
            for (const auto& c : cands) cand_ids.insert(c.id);
            for (const auto& c : cands) {
                bool beaten = state.dominated_outside_top(c.id);
                for (const auto& chain : state.chains) {
                    if (beaten) break;
                    if (chain.retired ||
                        std::find(chain.members.begin(), chain.members.end(), c.id) != chain.members.end()) {
                        continue;
                    }
                    for (auto x : chain.members) {
                        if (state.in_top(x) || (options.compare_heads && cand_ids.count(x) != 0) ||
                            session.graph().dominates(c.id, x)) {
                            continue;
                        }
                        if (session.compare(c, session.tuple(x)) == ComparisonOutcome::SecondDominates) {
                            beaten = true;
                            break;
                        }
                    }
                }
            }
            drop_dominated(state, cands);
        }

        if (cands.size() == 1) {
            const bool sure = state.last_certain() && !batch.assumed_comparable;
            state.push_pending(cands.front(), sure);
            batch.resolved.push_back(cands.front());
            continue;
        }
        if (batch.resolved.empty()) {
            batch.candidates = std::move(cands);
        }
        break;
    }

    if (const auto top = state.top(); !top.empty()) {
        const auto last = top.back().id;
        for (std::size_t i = 0; i < state.chains.size(); ++i) {
            const auto& ch = state.chains[i];
            if (!ch.retired && std::find(ch.members.begin(), ch.members.end(), last) != ch.members.end()) {
                batch.source_chain_of_th = i;
                break;
            }
        }
    }
    return batch;
}

}  // namespace getnext
