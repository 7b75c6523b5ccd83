#include "getnext/candidate_testing.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <unordered_set>

namespace getnext {

namespace {

void require_item_capacity(std::size_t m) {
    if (m > kMaxItems) {
        throw std::invalid_argument("itemset mining supports at most 64 attributes");
    }
}

std::unordered_set<TupleId> id_set(std::span<const Tuple> top) {
    std::unordered_set<TupleId> ids;
    for (const auto& t : top) ids.insert(t.id);
    return ids;
}

Query query_for(const Tuple& candidate, ItemSet items) {
    Query q(candidate.values.size());
    for (AttrIndex a = 0; a < candidate.values.size(); ++a) {
        if (items & (ItemSet{1} << a)) {
            q.set(a, candidate.values[a]);
        }
    }
    return q;
}

/// First tuple of the result outside the top set, if any.
const Tuple* best_outside(const QueryResult& r, const std::unordered_set<TupleId>& top_ids) {
    for (const auto& t : r.tuples) {
        if (top_ids.count(t.id) == 0) {
            return &t;
        }
    }
    return nullptr;
}

}  // namespace

std::vector<Transaction> build_transactions(std::span<const Tuple> top, const Tuple& candidate) {
    require_item_capacity(candidate.values.size());
    std::vector<Transaction> out;
    out.reserve(top.size());
    for (std::size_t i = 0; i < top.size(); ++i) {
        ItemSet items = 0;
        for (AttrIndex a = 0; a < candidate.values.size(); ++a) {
            if (top[i].values[a] == candidate.values[a]) {
                items |= ItemSet{1} << a;
            }
        }
        out.push_back({items, i});
    }
    return out;
}

std::size_t support(std::span<const Transaction> transactions, ItemSet items) {
    return static_cast<std::size_t>(std::count_if(transactions.begin(), transactions.end(),
                                                  [&](const Transaction& t) { return (t.items & items) == items; }));
}

std::vector<ItemSet> minimal_infrequent_itemsets(std::span<const Transaction> transactions, std::size_t num_items,
                                                 int k, std::size_t max_level) {
    require_item_capacity(num_items);
    if (k < 1 || transactions.size() < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("beyond-h mining requires h >= k");
    }
    const auto threshold = static_cast<std::size_t>(k);
    std::vector<ItemSet> result;
    std::vector<ItemSet> frequent{ItemSet{0}};  // the empty set has support h >= k
    for (std::size_t level = 1; level <= std::min(max_level, num_items) && !frequent.empty(); ++level) {
        std::unordered_set<ItemSet> frequent_lookup(frequent.begin(), frequent.end());
        std::vector<ItemSet> next;
        for (auto base : frequent) {
            const auto top_item = base == 0 ? -1 : 63 - std::countl_zero(base);
            for (auto item = static_cast<std::size_t>(top_item + 1); item < num_items; ++item) {
                const ItemSet cand = base | (ItemSet{1} << item);
                // apriori: every (level-1)-subset must be frequent
                bool all_frequent = true;
                for (ItemSet rest = cand; rest != 0 && all_frequent; rest &= rest - 1) {
                    const ItemSet bit = rest & (~rest + 1);
                    if (frequent_lookup.count(cand & ~bit) == 0) all_frequent = false;
                }
                if (!all_frequent) {
                    continue;
                }
                if (support(transactions, cand) < threshold) {
                    result.push_back(cand);
                } else {
                    next.push_back(cand);
                }
            }
        }
        frequent = std::move(next);
    }
    std::sort(result.begin(), result.end(), [](ItemSet a, ItemSet b) {
        const auto pa = std::popcount(a);
        const auto pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    return result;
}

std::vector<ItemSet> minimal_infrequent_itemsets(std::span<const Transaction> transactions, std::size_t num_items,
                                                 int k) {
    const auto h = transactions.size();
    const auto cap = h + 1 >= static_cast<std::size_t>(k) ? h + 1 - static_cast<std::size_t>(k) : 0;
    return minimal_infrequent_itemsets(transactions, num_items, k, std::min(cap, num_items));
}

std::vector<BeyondHQuery> beyond_h_queries(std::span<const Tuple> top, const Tuple& candidate, int k) {
    const auto transactions = build_transactions(top, candidate);
    std::vector<BeyondHQuery> out;
    for (auto items : minimal_infrequent_itemsets(transactions, candidate.values.size(), k)) {
        BeyondHQuery b;
        b.query = query_for(candidate, items);
        b.attribute_set = items;
        b.matched_candidates = {candidate.id};
        b.owners = {candidate.id};
        out.push_back(std::move(b));
    }
    return out;
}

bool test_candidate(QuerySession& session, std::span<const Tuple> top, const Tuple& candidate) {
    const auto top_ids = id_set(top);
    if (top_ids.count(candidate.id) != 0) {
        throw std::invalid_argument("candidate is already in the top set");
    }
    session.learn(candidate);
    for (auto p : session.graph().predecessors(candidate.id)) {
        if (top_ids.count(p) == 0) {
            return false;
        }
    }
    for (const auto& b : beyond_h_queries(top, candidate, session.k())) {
        const auto& r = session.run(b.query);
        const auto* best = best_outside(r, top_ids);
        if (best == nullptr || best->id != candidate.id) {
            return false;
        }
    }
    return true;
}

double expected_match_fraction(const Schema& schema, const Query& q) {
    double fraction = 1.0;
    for (auto a : q.attributes()) {
        fraction /= static_cast<double>(schema.domain_size(a));
    }
    return fraction;
}

std::vector<BeyondHQuery> order_queries(std::vector<BeyondHQuery> pool, const Schema& schema,
                                        std::size_t num_candidates, const QueryWeights& weights) {
    const double denom = num_candidates == 0 ? 1.0 : static_cast<double>(num_candidates);
    for (auto& b : pool) {
        b.score = weights.candidates * static_cast<double>(b.matched_candidates.size()) / denom +
                  weights.selectivity * expected_match_fraction(schema, b.query);
    }
    std::stable_sort(pool.begin(), pool.end(), [](const BeyondHQuery& x, const BeyondHQuery& y) {
        if (x.score != y.score) return x.score > y.score;
        const auto sx = x.query.size();
        const auto sy = y.query.size();
        if (sx != sy) return sx < sy;
        const auto ax = x.query.attributes();
        const auto ay = y.query.attributes();
        if (ax != ay) return ax < ay;
        return x.query < y.query;
    });
    return pool;
}

// ---------------------------------------------------------------------------

std::vector<Tuple> crawl_all(QuerySession& session) {
    const auto& schema = session.schema();
    std::vector<Query> frontier{Query::select_all(schema.size())};
    std::vector<TupleId> found;
    std::unordered_set<TupleId> seen;
    while (!frontier.empty()) {
        const Query q = frontier.back();
        frontier.pop_back();
        const auto& r = session.run(q);
        for (const auto& t : r.tuples) {
            if (seen.insert(t.id).second) found.push_back(t.id);
        }
        if (r.status != ResultStatus::Overflow) {
            continue;
        }
        std::optional<AttrIndex> split;
        for (AttrIndex a = 0; a < schema.size(); ++a) {
            if (!q.has(a)) {
                split = a;
                break;
            }
        }
        if (!split) {
            throw InconsistentRankingError("fully specified query overflowed: duplicate tuples?");
        }
        for (std::size_t v = schema.domain_size(*split); v-- > 0;) {
            Query child = q;
            child.set(*split, static_cast<Value>(v));
            frontier.push_back(std::move(child));
        }
    }

    // topological order of the observed dominance, ties by id
    const auto& g = session.graph();
    std::unordered_map<TupleId, std::size_t> indegree;
    for (auto id : found) indegree[id] = 0;
    for (auto id : found) {
        for (auto s : g.successors(id)) {
            if (indegree.count(s)) ++indegree[s];
        }
    }
    std::vector<TupleId> ready;
    for (auto id : found) {
        if (indegree[id] == 0) ready.push_back(id);
    }
    std::vector<Tuple> out;
    while (!ready.empty()) {
        auto it = std::min_element(ready.begin(), ready.end());
        const auto id = *it;
        ready.erase(it);
        out.push_back(session.tuple(id));
        for (auto s : g.successors(id)) {
            if (indegree.count(s) && --indegree[s] == 0) ready.push_back(s);
        }
    }
    return out;
}

bool exhaustive_test(QuerySession& session, std::span<const Tuple> top, const Tuple& candidate) {
    const auto m = candidate.values.size();
    require_item_capacity(m);
    if (m > 30) {
        throw std::invalid_argument("exhaustive test is limited to small attribute counts");
    }
    const auto top_ids = id_set(top);
    std::vector<ItemSet> all(std::size_t{1} << m);
    for (ItemSet s = 0; s < all.size(); ++s) all[s] = s;
    std::stable_sort(all.begin(), all.end(),
                     [](ItemSet a, ItemSet b) { return std::popcount(a) < std::popcount(b); });
    for (auto items : all) {
        const auto& r = session.run(query_for(candidate, items));
        const auto* best = best_outside(r, top_ids);
        if (best != nullptr && best->id != candidate.id) {
            return false;
        }
        if (best == nullptr && r.status == ResultStatus::Overflow) {
            // only top tuples were shown; this query says nothing about the candidate
            continue;
        }
    }
    return true;
}

}  // namespace getnext
