#include "getnext/state.hpp"

namespace getnext {

std::vector<Tuple> GetNextState::top() const {
    std::vector<Tuple> out = verified;
    for (const auto& p : pending_resolved) {
        out.push_back(p.tuple);
    }
    return out;
}

bool GetNextState::last_certain() const {
    if (!pending_resolved.empty()) {
        return pending_resolved.back().certain;
    }
    return certain.empty() || certain.back();
}

bool GetNextState::dominated_outside_top(TupleId id) const {
    const auto& g = session.graph();
    if (!g.contains(id)) {
        return false;
    }
    // Every observed domination is truthful and the top set is closed under it, so any path
    // from an outside tuple ends with a direct edge from an outside tuple.
    for (auto p : g.predecessors(id)) {
        if (!in_top(p)) {
            return true;
        }
    }
    return false;
}

void GetNextState::push_pending(const Tuple& t, bool is_certain) {
    pending_resolved.push_back({t, is_certain});
    top_ids_.insert(t.id);
}

void GetNextState::push_verified(const Tuple& t, bool is_certain) {
    verified.push_back(t);
    certain.push_back(is_certain);
    top_ids_.insert(t.id);
}

Tuple GetNextState::promote_pending() {
    auto p = std::move(pending_resolved.front());
    pending_resolved.pop_front();
    verified.push_back(p.tuple);
    certain.push_back(p.certain);
    return p.tuple;
}

}  // namespace getnext
