#include "getnext/dominance.hpp"

#include <algorithm>
#include <sstream>

namespace getnext {

Query most_specific_query(const Tuple& t, const Tuple& u) {
    if (t.values.size() != u.values.size()) {
        throw SchemaError("tuples have different arity");
    }
    Query q(t.values.size());
    for (AttrIndex a = 0; a < t.values.size(); ++a) {
        if (t.values[a] == u.values[a]) {
            q.set(a, t.values[a]);
        }
    }
    return q;
}

// ---------------------------------------------------------------------------

void DominanceGraph::add_node(TupleId id) {
    if (index_.count(id) != 0) {
        return;
    }
    const auto idx = ids_.size();
    index_.emplace(id, idx);
    ids_.push_back(id);
    out_.emplace_back();
    in_.emplace_back();
    ord_.push_back(idx);
}

std::size_t DominanceGraph::node_index(TupleId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw NotFoundError("tuple " + std::to_string(id) + " is not in the dominance graph");
    }
    return it->second;
}

bool DominanceGraph::has_edge(TupleId u, TupleId v) const {
    auto iu = index_.find(u);
    auto iv = index_.find(v);
    if (iu == index_.end() || iv == index_.end()) {
        return false;
    }
    return edges_.count(edge_key(iu->second, iv->second)) != 0;
}

void DominanceGraph::add_edge(TupleId u, TupleId v) {
    if (u == v) {
        throw InconsistentRankingError("tuple " + std::to_string(u) + " cannot dominate itself");
    }
    add_node(u);
    add_node(v);
    const auto iu = index_.at(u);
    const auto iv = index_.at(v);
    if (!edges_.insert(edge_key(iu, iv)).second) {
        return;
    }
    if (ord_[iu] > ord_[iv]) {
        try {
            reorder(iu, iv);
        } catch (...) {
            edges_.erase(edge_key(iu, iv));
            throw;
        }
    }
    out_[iu].push_back(iv);
    in_[iv].push_back(iu);
    reach_memo_.clear();
}

// Pearce-Kelly: restore a topological order after inserting u -> v with ord[v] < ord[u].
void DominanceGraph::reorder(std::size_t u, std::size_t v) {
    const auto lower = ord_[v];
    const auto upper = ord_[u];

    std::vector<std::size_t> forward;
    std::vector<char> seen(ids_.size(), 0);
    std::vector<std::size_t> stack{v};
    seen[v] = 1;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        forward.push_back(n);
        for (auto w : out_[n]) {
            if (w == u) {
                throw InconsistentRankingError("observed results contradict a static ranking: tuple " +
                                               std::to_string(ids_[u]) + " and tuple " +
                                               std::to_string(ids_[v]) + " dominate each other");
            }
            if (!seen[w] && ord_[w] < upper) {
                seen[w] = 1;
                stack.push_back(w);
            }
        }
    }

    std::vector<std::size_t> backward;
    stack.push_back(u);
    seen[u] = 1;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        backward.push_back(n);
        for (auto w : in_[n]) {
            if (!seen[w] && ord_[w] > lower) {
                seen[w] = 1;
                stack.push_back(w);
            }
        }
    }

    auto by_ord = [this](std::size_t a, std::size_t b) { return ord_[a] < ord_[b]; };
    std::sort(forward.begin(), forward.end(), by_ord);
    std::sort(backward.begin(), backward.end(), by_ord);

    std::vector<std::size_t> slots;
    slots.reserve(forward.size() + backward.size());
    for (auto n : backward) slots.push_back(ord_[n]);
    for (auto n : forward) slots.push_back(ord_[n]);
    std::sort(slots.begin(), slots.end());

    std::size_t i = 0;
    for (auto n : backward) ord_[n] = slots[i++];
    for (auto n : forward) ord_[n] = slots[i++];
}

bool DominanceGraph::dominates(TupleId u, TupleId v) const {
    auto iu_it = index_.find(u);
    auto iv_it = index_.find(v);
    if (iu_it == index_.end() || iv_it == index_.end() || u == v) {
        return false;
    }
    const auto iu = iu_it->second;
    const auto iv = iv_it->second;
    if (ord_[iu] >= ord_[iv]) {
        return false;
    }
    const auto key = edge_key(iu, iv);
    if (auto it = reach_memo_.find(key); it != reach_memo_.end()) {
        return it->second;
    }
    bool found = edges_.count(key) != 0;
    if (!found) {
        std::vector<char> seen(ids_.size(), 0);
        std::vector<std::size_t> stack{iu};
        seen[iu] = 1;
        while (!stack.empty() && !found) {
            const auto n = stack.back();
            stack.pop_back();
            for (auto w : out_[n]) {
                if (w == iv) {
                    found = true;
                    break;
                }
                if (!seen[w] && ord_[w] < ord_[iv]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
    }
    reach_memo_.emplace(key, found);
    return found;
}

DominanceGraph::ChainId DominanceGraph::add_result_edges(std::span<const TupleId> ranked) {
    for (auto id : ranked) {
        add_node(id);
    }
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        for (std::size_t j = i + 1; j < ranked.size(); ++j) {
            add_edge(ranked[i], ranked[j]);
        }
    }
    chains_.emplace_back(ranked.begin(), ranked.end());
    return chains_.size() - 1;
}

std::vector<TupleId> DominanceGraph::predecessors(TupleId id) const {
    std::vector<TupleId> out;
    for (auto p : in_[node_index(id)]) {
        out.push_back(ids_[p]);
    }
    return out;
}

std::vector<TupleId> DominanceGraph::successors(TupleId id) const {
    std::vector<TupleId> out;
    for (auto s : out_[node_index(id)]) {
        out.push_back(ids_[s]);
    }
    return out;
}

std::vector<TupleId> DominanceGraph::topological_order() const {
    std::vector<std::size_t> idx(ids_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) { return ord_[a] < ord_[b]; });
    std::vector<TupleId> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ids_[i]);
    return out;
}

std::string DominanceGraph::to_dot() const {
    std::ostringstream os;
    os << "digraph dominance {\n";
    for (auto id : ids_) {
        os << "  t" << id << " [label=\"" << id << "\"];\n";
    }
    for (std::size_t u = 0; u < out_.size(); ++u) {
        auto targets = out_[u];
        std::sort(targets.begin(), targets.end());
        for (auto v : targets) {
            os << "  t" << ids_[u] << " -> t" << ids_[v] << ";\n";
        }
    }
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------

QuerySession::QuerySession(TopKSource& source) : source_(source) {}

std::uint64_t QuerySession::pair_key(TupleId a, TupleId b) noexcept {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b);
}

const Tuple& QuerySession::tuple(TupleId id) const {
    auto it = known_.find(id);
    if (it == known_.end()) {
        throw NotFoundError("tuple " + std::to_string(id) + " has not been observed");
    }
    return it->second;
}

void QuerySession::learn(const Tuple& t) {
    if (known_.count(t.id) != 0) {
        return;
    }
    known_.emplace(t.id, t);
    known_order_.push_back(t.id);
    graph_.add_node(t.id);
    // Earlier overflowing queries that match t but did not return it rank all their results above t.
    for (const auto* entry : overflowing_) {
        const auto& [q, r] = *entry;
        if (!q.matches(t)) {
            continue;
        }
        for (const auto& returned : r.tuples) {
            if (returned.id == t.id) {
                throw InconsistentRankingError("tuple " + std::to_string(t.id) +
                                               " was returned before it was first learned");
            }
            graph_.add_edge(returned.id, t.id);
        }
    }
}

const QueryResult* QuerySession::cached(const Query& q) const {
    auto it = cache_.find(q);
    return it == cache_.end() ? nullptr : &it->second;
}

const QueryResult& QuerySession::run(const Query& q) {
    if (auto it = cache_.find(q); it != cache_.end()) {
        return it->second;
    }
    const auto before = source_.query_count();
    auto result = source_.execute(q);
    // charge what the source actually counted (a constrained source may answer for free)
    (phase_ == Phase::Generation ? issued_generation_ : issued_testing_) += source_.query_count() - before;
    auto [it, inserted] = cache_.emplace(q, std::move(result));
    ingest(it->first, it->second);
    if (it->second.status == ResultStatus::Overflow) {
        overflowing_.push_back(&*it);
    }
    return it->second;
}

void QuerySession::ingest(const Query& q, const QueryResult& r) {
    std::vector<TupleId> ids;
    ids.reserve(r.tuples.size());
    for (const auto& t : r.tuples) {
        learn(t);
        ids.push_back(t.id);
    }
    graph_.add_result_edges(ids);
    if (r.status != ResultStatus::Overflow) {
        return;
    }
    std::unordered_set<TupleId> returned(ids.begin(), ids.end());
    for (auto id : known_order_) {
        if (returned.count(id) != 0) {
            continue;
        }
        const auto& t = known_.at(id);
        if (!q.matches(t)) {
            continue;
        }
        for (auto top : ids) {
            graph_.add_edge(top, id);
        }
    }
}

std::optional<ComparisonOutcome> QuerySession::known_comparison(const Tuple& t, const Tuple& u) const {
    if (auto it = comparisons_.find(pair_key(t.id, u.id)); it != comparisons_.end()) {
        const auto outcome = it->second;
        if (outcome == ComparisonOutcome::Incomparable) {
            return outcome;
        }
        // stored relative to the smaller id first
        const bool t_first = t.id < u.id;
        const bool first_wins = outcome == ComparisonOutcome::FirstDominates;
        return first_wins == t_first ? ComparisonOutcome::FirstDominates
                                     : ComparisonOutcome::SecondDominates;
    }
    if (graph_.has_edge(t.id, u.id)) {
        return ComparisonOutcome::FirstDominates;
    }
    if (graph_.has_edge(u.id, t.id)) {
        return ComparisonOutcome::SecondDominates;
    }
    return std::nullopt;
}

ComparisonOutcome QuerySession::compare(const Tuple& t, const Tuple& u) {
    if (t.id == u.id) {
        throw std::invalid_argument("compare_direct needs two distinct tuples");
    }
    learn(t);
    learn(u);
    if (auto known = known_comparison(t, u)) {
        return *known;
    }
    const auto& r = run(most_specific_query(t, u));
    std::optional<std::size_t> pos_t;
    std::optional<std::size_t> pos_u;
    for (std::size_t i = 0; i < r.tuples.size(); ++i) {
        if (r.tuples[i].id == t.id) pos_t = i;
        if (r.tuples[i].id == u.id) pos_u = i;
    }
    ComparisonOutcome outcome = ComparisonOutcome::Incomparable;
    if (pos_t && (!pos_u || *pos_t < *pos_u)) {
        outcome = ComparisonOutcome::FirstDominates;
    } else if (pos_u) {
        outcome = ComparisonOutcome::SecondDominates;
    }
    ComparisonOutcome stored = outcome;
    if (outcome != ComparisonOutcome::Incomparable && t.id > u.id) {
        stored = outcome == ComparisonOutcome::FirstDominates ? ComparisonOutcome::SecondDominates
                                                              : ComparisonOutcome::FirstDominates;
    }
    comparisons_.emplace(pair_key(t.id, u.id), stored);
    return outcome;
}

}  // namespace getnext
