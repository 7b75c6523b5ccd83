#pragma once

// Shared test helpers: random instances and brute-force oracles that look at the full data.

#include <algorithm>
#include <bit>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "getnext/core_db.hpp"
#include "getnext/dominance.hpp"
#include "getnext/harness.hpp"

#ifndef GETNEXT_FIXTURE_DIR
#define GETNEXT_FIXTURE_DIR "tests/fixtures"
#endif

namespace testsupport {

using namespace getnext;

inline std::shared_ptr<const RankedDataset> table1() {
    auto loaded = load_csv(std::string(GETNEXT_FIXTURE_DIR) + "/table1.csv");
    return std::make_shared<const RankedDataset>(std::move(loaded.dataset), *loaded.explicit_ranking);
}

/// Tuple with the given 1-based id in `data`.
inline const Tuple& tuple_of(const RankedDataset& data, TupleId id) { return *data.dataset().find(id); }

struct InstanceParams {
    std::size_t min_m = 2;
    std::size_t max_m = 8;
    std::size_t max_domain = 3;
    std::size_t max_n = 64;
};

/// Random categorical instance with a random total order. Values are skewed so that
/// agreements (and hence non-trivial comparisons) are common.
inline std::shared_ptr<const RankedDataset> random_instance(std::mt19937_64& rng, const InstanceParams& p = {}) {
    std::uniform_int_distribution<std::size_t> m_dist(p.min_m, p.max_m);
    const auto m = m_dist(rng);
    std::vector<Attribute> attrs;
    std::uint64_t capacity = 1;
    for (std::size_t a = 0; a < m; ++a) {
        std::uniform_int_distribution<std::size_t> d_dist(2, p.max_domain);
        const auto d = d_dist(rng);
        Attribute attr{"A" + std::to_string(a + 1), {}};
        for (std::size_t v = 0; v < d; ++v) attr.domain.push_back(std::to_string(v));
        capacity *= d;
        attrs.push_back(std::move(attr));
    }
    Schema schema(attrs);
    const auto n_max = static_cast<std::size_t>(std::min<std::uint64_t>(capacity, p.max_n));
    std::uniform_int_distribution<std::size_t> n_dist(std::min<std::size_t>(2, n_max), n_max);
    const auto n = n_dist(rng);
    std::uniform_real_distribution<double> skew(0.2, 0.8);
    std::vector<double> bias(m);
    for (auto& b : bias) b = skew(rng);

    std::set<std::vector<Value>> seen;
    std::vector<Tuple> tuples;
    std::size_t attempts = 0;
    while (tuples.size() < n) {
        std::vector<Value> v(m);
        for (std::size_t a = 0; a < m; ++a) {
            // value 0 with probability bias[a], otherwise uniform over the rest
            std::bernoulli_distribution zero(bias[a]);
            std::uniform_int_distribution<Value> rest(1, static_cast<Value>(schema.domain_size(a) - 1));
            v[a] = zero(rng) ? 0 : rest(rng);
        }
        if (++attempts > 200000) break;
        if (seen.insert(v).second) tuples.push_back({static_cast<TupleId>(tuples.size() + 1), v});
    }
    return std::make_shared<const RankedDataset>(Dataset(schema, std::move(tuples)),
                                                 SeededRandomOrder{rng()});
}

/// Matching tuples in rank order.
inline std::vector<Tuple> brute_matches(const RankedDataset& data, const Query& q) {
    std::vector<Tuple> out;
    for (const auto& t : data.in_rank_order())
        if (q.matches(t)) out.push_back(t);
    return out;
}

inline std::vector<Tuple> brute_top(const RankedDataset& data, std::size_t h) {
    auto all = data.in_rank_order();
    return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(h, all.size()))};
}

/// True iff u is returned above t by the most-specific query of the pair.
inline bool brute_directly_dominates(const RankedDataset& data, int k, const Tuple& u, const Tuple& t) {
    const auto matches = brute_matches(data, most_specific_query(u, t));
    for (std::size_t i = 0; i < matches.size() && i < static_cast<std::size_t>(k); ++i) {
        if (matches[i].id == u.id) return true;
        if (matches[i].id == t.id) return false;
    }
    return false;
}

/// A candidate passes testing iff no tuple outside `top` directly dominates it.
inline bool brute_test(const RankedDataset& data, int k, const std::vector<Tuple>& top, const Tuple& cand) {
    std::set<TupleId> in_top;
    for (const auto& t : top) in_top.insert(t.id);
    for (const auto& u : data.dataset().tuples()) {
        if (u.id == cand.id || in_top.count(u.id)) continue;
        if (brute_directly_dominates(data, k, u, cand)) return false;
    }
    return true;
}

/// Minimal infrequent itemsets by exhaustive enumeration of all 2^m subsets.
inline std::vector<std::uint64_t> brute_minimal_infrequent(const std::vector<Tuple>& top, const Tuple& cand, int k,
                                                           std::size_t max_level) {
    const auto m = cand.values.size();
    auto support = [&](std::uint64_t s) {
        std::size_t c = 0;
        for (const auto& t : top) {
            bool all = true;
            for (std::size_t a = 0; a < m && all; ++a)
                if ((s >> a) & 1U) all = t.values[a] == cand.values[a];
            c += all;
        }
        return c;
    };
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = 1; s < (std::uint64_t{1} << m); ++s) {
        if (static_cast<std::size_t>(std::popcount(s)) > max_level) continue;
        if (support(s) >= static_cast<std::size_t>(k)) continue;
        bool minimal = true;
        for (std::size_t a = 0; a < m && minimal; ++a)
            if (((s >> a) & 1U) && support(s & ~(std::uint64_t{1} << a)) < static_cast<std::size_t>(k)) minimal = false;
        if (minimal) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return std::popcount(a) != std::popcount(b) ? std::popcount(a) < std::popcount(b) : a < b;
    });
    return out;
}

inline std::vector<TupleId> ids(const std::vector<Tuple>& ts) {
    std::vector<TupleId> out;
    for (const auto& t : ts) out.push_back(t.id);
    return out;
}

/// Forwards to another source, showing each query to `observer` first.
class RecordingSource final : public TopKSource {
public:
    explicit RecordingSource(TopKSource& inner) : inner_(inner) {}
    const Schema& schema() const override { return inner_.schema(); }
    int k() const override { return inner_.k(); }
    std::int64_t query_count() const override { return inner_.query_count(); }
    QueryResult execute(const Query& q) override {
        if (observer) observer(q);
        return inner_.execute(q);
    }
    std::function<void(const Query&)> observer;

private:
    TopKSource& inner_;
};

}  // namespace testsupport
