#include "getnext/engine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace getnext {

std::string_view to_string(Algorithm a) {
    return a == Algorithm::BeyondH ? "beyond-h" : "ordered";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "beyond-h" || name == "beyond_h" || name == "beyondh") {
        return Algorithm::BeyondH;
    }
    if (name == "ordered") {
        return Algorithm::Ordered;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (expected beyond-h or ordered)");
}

void bootstrap(GetNextState& state) {
    if (state.bootstrapped) {
        return;
    }
    auto& session = state.session;
    session.set_phase(Phase::Generation);
    const auto all = Query::select_all(session.schema().size());
    const auto& r = session.run(all);
    CoverChain chain{all, r.status, {}, false};
    for (const auto& t : r.tuples) {
        state.push_verified(t, true);
        chain.members.push_back(t.id);
    }
    state.chains.push_back(std::move(chain));
    state.bootstrapped = true;
}

std::pair<Tuple, bool> resolve_tie(GetNextState& state, std::vector<Tuple> nondominated) {
    if (nondominated.empty()) {
        throw std::logic_error("resolve_tie called with no candidates");
    }
    if (nondominated.size() == 1) {
        return {std::move(nondominated.front()), true};
    }
    std::sort(nondominated.begin(), nondominated.end(),
              [](const Tuple& a, const Tuple& b) { return a.id < b.id; });
    std::uniform_int_distribution<std::size_t> pick(0, nondominated.size() - 1);
    return {std::move(nondominated[pick(state.rng)]), false};
}

namespace {

std::vector<Tuple> survivors_beyond_h(GetNextState& state, const std::vector<Tuple>& candidates) {
    auto& session = state.session;
    const auto top = state.top();
    std::vector<Tuple> survivors;
    for (const auto& c : candidates) {
        if (state.dominated_outside_top(c.id)) {
            continue;
        }
        if (test_candidate(session, top, c)) {
            survivors.push_back(c);
        }
    }
    return survivors;
}

std::vector<Tuple> survivors_ordered(GetNextState& state, const std::vector<Tuple>& candidates,
                                     const QueryWeights& weights) {
    auto& session = state.session;
    const auto top = state.top();

    std::map<Query, BeyondHQuery> pooled;
    for (const auto& c : candidates) {
        for (auto& b : beyond_h_queries(top, c, session.k())) {
            auto [it, inserted] = pooled.try_emplace(b.query, b);
            if (!inserted) {
                it->second.owners.push_back(c.id);
            }
        }
    }
    std::vector<BeyondHQuery> pool;
    pool.reserve(pooled.size());
    for (auto& [q, b] : pooled) {
        b.matched_candidates.clear();
        for (const auto& c : candidates) {
            if (q.matches(c)) b.matched_candidates.push_back(c.id);
        }
        pool.push_back(std::move(b));
    }
    const auto ordered = order_queries(std::move(pool), session.schema(), candidates.size(), weights);

    std::vector<Tuple> alive;
    for (const auto& c : candidates) {
        if (!state.dominated_outside_top(c.id)) alive.push_back(c);
    }
    for (const auto& b : ordered) {
        if (alive.size() <= 1) {
            break;
        }
        const bool useful = std::any_of(b.owners.begin(), b.owners.end(), [&](TupleId id) {
            return std::any_of(alive.begin(), alive.end(), [&](const Tuple& t) { return t.id == id; });
        });
        if (!useful) {
            continue;
        }
        session.run(b.query);
        std::erase_if(alive, [&](const Tuple& t) { return state.dominated_outside_top(t.id); });
    }
    if (alive.size() > 1) {
        // Every survivor has had all of its queries answered, so this costs nothing.
        std::erase_if(alive, [&](const Tuple& t) { return !test_candidate(session, top, t); });
    }
    return alive;
}

template <typename Tester>
std::optional<Tuple> get_next_with(GetNextState& state, const EngineOptions& options, Tester&& tester) {
    bootstrap(state);
    if (!state.pending_resolved.empty()) {
        return state.promote_pending();
    }
    const auto batch = generate_candidates_dag(state, options.generation);
    if (!batch.resolved.empty()) {
        return state.promote_pending();
    }
    if (batch.candidates.empty()) {
        return std::nullopt;
    }
    auto& session = state.session;
    session.set_phase(Phase::Testing);
    auto survivors = tester(state, batch.candidates);
    session.set_phase(Phase::Generation);
    if (survivors.empty()) {
        throw InconsistentRankingError("candidate testing rejected every candidate");
    }
    const bool prefix_certain = state.last_certain();
    auto [pick, forced] = resolve_tie(state, std::move(survivors));
    state.push_verified(pick, forced && prefix_certain && !batch.assumed_comparable);
    return pick;
}

}  // namespace

std::optional<Tuple> get_next_beyond_h(GetNextState& state, const EngineOptions& options) {
    return get_next_with(state, options,
                         [](GetNextState& s, const std::vector<Tuple>& c) { return survivors_beyond_h(s, c); });
}

std::optional<Tuple> get_next_ordered(GetNextState& state, const EngineOptions& options) {
    return get_next_with(state, options, [&](GetNextState& s, const std::vector<Tuple>& c) {
        return survivors_ordered(s, c, options.weights);
    });
}

std::optional<Tuple> get_next(GetNextState& state, const EngineOptions& options) {
    return options.algorithm == Algorithm::BeyondH ? get_next_beyond_h(state, options)
                                                   : get_next_ordered(state, options);
}

// ---------------------------------------------------------------------------

Extraction::Extraction(TopKSource& source, EngineOptions options)
    : source_(source), options_(options), state_(source, options.seed), start_count_(source.query_count()) {}

bool Extraction::advance() {
    if (exhausted_) {
        return false;
    }
    if (!get_next(state_, options_)) {
        exhausted_ = true;
    }
    return !exhausted_;
}

std::optional<Tuple> Extraction::next() {
    bootstrap(state_);
    if (emitted_ == state_.verified.size()) {
        state_.lookahead = 1;
        if (!advance()) {
            return std::nullopt;
        }
    }
    return state_.verified[emitted_++];
}

void Extraction::extend_to(std::size_t h) {
    bootstrap(state_);
    while (state_.verified.size() < h && !exhausted_) {
        state_.lookahead = h - state_.verified.size();
        advance();
    }
    if (state_.verified.size() < h && !state_.pending_resolved.empty()) {
        throw std::logic_error("pending tuples left behind");
    }
    // A valid or empty SELECT * means the whole database has been seen.
    if (state_.verified.size() < h && !state_.chains.empty() && state_.chains.front().status != ResultStatus::Overflow) {
        exhausted_ = true;
    }
}

ExtractionReport Extraction::report(std::size_t h_requested) const {
    ExtractionReport r;
    const auto count = std::min(h_requested, state_.verified.size());
    r.tuples.assign(state_.verified.begin(), state_.verified.begin() + static_cast<std::ptrdiff_t>(count));
    r.certainty_flags.assign(state_.certain.begin(), state_.certain.begin() + static_cast<std::ptrdiff_t>(count));
    r.query_cost_total = source_.query_count() - start_count_;
    r.query_cost_generation = state_.session.issued(Phase::Generation);
    r.query_cost_testing = state_.session.issued(Phase::Testing);
    r.seed = options_.seed;
    r.algorithm = options_.algorithm;
    r.k = source_.k();
    r.h_requested = h_requested;
    r.exhausted = count < h_requested;
    return r;
}

ExtractionReport get_top_h(TopKSource& iface, std::size_t h, const EngineOptions& options, const RankOracle* oracle) {
    if (h == 0) {
        throw std::invalid_argument("h must be at least 1");
    }
    Extraction extraction(iface, options);
    extraction.extend_to(h);
    auto report = extraction.report(h);
    if (oracle != nullptr && !report.tuples.empty()) {
        const auto before = known_precedence(extraction.state(), report.tuples, report.certainty_flags);
        report.kendall_tau_expected =
            expected_kendall_tau(before, report.tuples, *oracle, options.tau_samples, options.seed);
    }
    return report;
}

ExtractionReport get_top_h_constrained(TopKSource& iface, const Query& constraint, std::size_t h,
                                       const EngineOptions& options, const RankOracle* oracle) {
    ConstrainedSource constrained(iface, constraint);
    return get_top_h(constrained, h, options, oracle);
}

ExtractionReport get_top_h_postfiltered(TopKSource& iface, const Query& filter, std::size_t h,
                                        const EngineOptions& options) {
    filter.validate(iface.schema());
    Extraction extraction(iface, options);
    extraction.state().lookahead = 1;
    std::size_t matched = 0;
    extraction.extend_to(1);
    auto count_matches = [&] {
        return static_cast<std::size_t>(std::count_if(extraction.state().verified.begin(),
                                                      extraction.state().verified.end(),
                                                      [&](const Tuple& t) { return filter.matches(t); }));
    };
    matched = count_matches();
    while (matched < h && !extraction.exhausted()) {
        extraction.extend_to(extraction.state().verified.size() + 1);
        matched = count_matches();
    }
    const auto full = extraction.report(extraction.state().verified.size());
    ExtractionReport r = full;
    r.tuples.clear();
    r.certainty_flags.clear();
    for (std::size_t i = 0; i < full.tuples.size() && r.tuples.size() < h; ++i) {
        if (filter.matches(full.tuples[i])) {
            r.tuples.push_back(full.tuples[i]);
            r.certainty_flags.push_back(full.certainty_flags[i]);
        }
    }
    r.h_requested = h;
    r.exhausted = r.tuples.size() < h;
    return r;
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& scratch, std::size_t lo,
                              std::size_t hi) {
    if (hi - lo < 2) {
        return 0;
    }
    const auto mid = lo + (hi - lo) / 2;
    auto count = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::size_t i = lo;
    std::size_t j = mid;
    std::size_t out = lo;
    while (i < mid && j < hi) {
        if (v[i] <= v[j]) {
            scratch[out++] = v[i++];
        } else {
            count += static_cast<std::int64_t>(mid - i);
            scratch[out++] = v[j++];
        }
    }
    while (i < mid) scratch[out++] = v[i++];
    while (j < hi) scratch[out++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

}  // namespace

std::int64_t kendall_tau(std::span<const TupleId> a, std::span<const TupleId> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("kendall_tau: rankings have different lengths");
    }
    std::unordered_map<TupleId, std::size_t> pos_in_b;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!pos_in_b.emplace(b[i], i).second) {
            throw std::invalid_argument("kendall_tau: repeated element in second ranking");
        }
    }
    std::vector<std::size_t> seq;
    seq.reserve(a.size());
    std::unordered_set<TupleId> seen;
    for (auto id : a) {
        auto it = pos_in_b.find(id);
        if (it == pos_in_b.end() || !seen.insert(id).second) {
            throw std::invalid_argument("kendall_tau: rankings are not permutations of the same elements");
        }
        seq.push_back(it->second);
    }
    std::vector<std::size_t> scratch(seq.size());
    return count_inversions(seq, scratch, 0, seq.size());
}

std::vector<std::vector<bool>> known_precedence(const GetNextState& state, std::span<const Tuple> output,
                                                const std::vector<bool>& certainty) {
    const auto n = output.size();
    std::size_t certain_prefix = 0;
    while (certain_prefix < n && certain_prefix < certainty.size() && certainty[certain_prefix]) {
        ++certain_prefix;
    }
    const auto& g = state.session.graph();
    std::vector<std::vector<bool>> before(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (i < certain_prefix && i < j) {
                before[i][j] = true;
            } else if (g.dominates(output[i].id, output[j].id)) {
                before[i][j] = true;
            }
        }
    }
    return before;
}

bool is_linear_extension(const DominanceGraph& graph, std::span<const Tuple> output) {
    for (std::size_t i = 0; i < output.size(); ++i) {
        for (std::size_t j = i + 1; j < output.size(); ++j) {
            if (graph.dominates(output[j].id, output[i].id)) {
                return false;
            }
        }
    }
    return true;
}

double expected_kendall_tau(const std::vector<std::vector<bool>>& before, std::span<const Tuple> output,
                            const RankOracle& oracle, std::size_t samples, std::uint64_t seed) {
    const auto n = output.size();
    if (n == 0 || samples == 0) {
        return 0.0;
    }
    std::vector<TupleId> truth;
    truth.reserve(n);
    for (const auto& t : output) truth.push_back(t.id);
    std::sort(truth.begin(), truth.end(), [&](TupleId a, TupleId b) {
        return oracle.rank_of(*oracle.data().dataset().find(a)) < oracle.rank_of(*oracle.data().dataset().find(b));
    });

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<std::size_t> indegree(n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (before[i][j]) ++indegree[j];
        std::vector<std::size_t> ready;
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] == 0) ready.push_back(i);
        std::vector<TupleId> linear;
        linear.reserve(n);
        while (!ready.empty()) {
            std::sort(ready.begin(), ready.end());
            std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
            const auto at = pick(rng);
            const auto node = ready[at];
            ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(at));
            linear.push_back(output[node].id);
            for (std::size_t j = 0; j < n; ++j) {
                if (before[node][j] && --indegree[j] == 0) ready.push_back(j);
            }
        }
        if (linear.size() != n) {
            throw InconsistentRankingError("known precedence among output tuples is cyclic");
        }
        total += static_cast<double>(kendall_tau(linear, truth));
    }
    return total / static_cast<double>(samples);
}

nlohmann::json to_json(const ExtractionReport& report, const Schema& schema) {
    nlohmann::json tuples = nlohmann::json::array();
    for (std::size_t i = 0; i < report.tuples.size(); ++i) {
        const auto& t = report.tuples[i];
        nlohmann::json values = nlohmann::json::array();
        for (AttrIndex a = 0; a < t.values.size(); ++a) {
            values.push_back(schema.label(a, t.values[a]));
        }
        tuples.push_back({{"id", t.id}, {"values", values}, {"certain", static_cast<bool>(report.certainty_flags[i])}});
    }
    nlohmann::json flags = nlohmann::json::array();
    for (bool f : report.certainty_flags) flags.push_back(f);
    nlohmann::json out = {
        {"algorithm", std::string(to_string(report.algorithm))},
        {"seed", report.seed},
        {"k", report.k},
        {"h", report.h_requested},
        {"exhausted", report.exhausted},
        {"cost", {{"total", report.query_cost_total},
                  {"generation", report.query_cost_generation},
                  {"testing", report.query_cost_testing}}},
        {"certainty_flags", flags},
        {"tuples", tuples},
    };
    out["kendall_tau_expected"] =
        report.kendall_tau_expected ? nlohmann::json(*report.kendall_tau_expected) : nlohmann::json(nullptr);
    return out;
}

}  // namespace getnext
