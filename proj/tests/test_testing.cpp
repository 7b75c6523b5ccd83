#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>

#include "getnext/candidate_testing.hpp"
#include "support.hpp"

using namespace getnext;
using namespace testsupport;

namespace {

constexpr ItemSet bit(AttrIndex a) { return ItemSet{1} << a; }

std::uint64_t binomial(std::uint64_t n, std::uint64_t r) {
    if (r > n) return 0;
    std::uint64_t out = 1;
    for (std::uint64_t i = 1; i <= r; ++i) out = out * (n - r + i) / i;
    return out;
}

}  // namespace

TEST_CASE("beyond-h queries on table 1") {
    const auto data = table1();
    const auto top3 = brute_top(*data, 3);
    // t4 agrees with no top-3 tuple on A2, so {A2} is minimal infrequent alongside {A3} and {A4}
    const auto tx = build_transactions(top3, tuple_of(*data, 4));
    CHECK(minimal_infrequent_itemsets(tx, 5, 3) == std::vector<ItemSet>{bit(1), bit(2), bit(3)});
    CHECK(minimal_infrequent_itemsets(build_transactions(top3, tuple_of(*data, 7)), 5, 3) ==
          std::vector<ItemSet>{bit(2), bit(3), bit(4)});

    const auto top5 = brute_top(*data, 5);
    CHECK(minimal_infrequent_itemsets(build_transactions(top5, tuple_of(*data, 6)), 5, 3) ==
          std::vector<ItemSet>{bit(0), bit(1), bit(3)});
    CHECK(minimal_infrequent_itemsets(build_transactions(top5, tuple_of(*data, 7)), 5, 3) ==
          std::vector<ItemSet>{bit(2), bit(4), bit(0) | bit(3), bit(1) | bit(3)});

    const auto qs = beyond_h_queries(top3, tuple_of(*data, 4), 3);
    REQUIRE(qs.size() == 3);
    CHECK(qs[0].query.to_string(data->schema()) == "A2=1");
    CHECK(qs[1].query.to_string(data->schema()) == "A3=1");
    CHECK(qs[2].query.to_string(data->schema()) == "A4=1");
    CHECK(qs[0].owners == std::vector<TupleId>{4});

    CHECK_THROWS_AS(minimal_infrequent_itemsets(build_transactions(brute_top(*data, 2), tuple_of(*data, 4)), 5, 3),
                    std::invalid_argument);
}

TEST_CASE("items no top tuple shares are still beyond-h queries") {
    // add u = 11000 between t3 and t4: only A2=1 returns u above t4
    const auto base = table1();
    auto tuples = base->dataset().tuples();
    tuples.push_back({8, {1, 1, 0, 0, 0}});
    const auto data = std::make_shared<const RankedDataset>(
        Dataset(base->schema(), tuples),
        ExplicitPermutation{{{1, 1}, {2, 2}, {3, 3}, {8, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}}});
    const auto top3 = brute_top(*data, 3);
    TopKInterface iface(data, 3);
    QuerySession session(iface);
    CHECK_FALSE(test_candidate(session, top3, tuple_of(*data, 4)));
    CHECK(brute_directly_dominates(*data, 3, tuple_of(*data, 8), tuple_of(*data, 4)));
    for (const auto& q : beyond_h_queries(top3, tuple_of(*data, 4), 3)) {
        const auto r = iface.execute(q.query);
        const bool shows_u = std::any_of(r.tuples.begin(), r.tuples.end(), [](const Tuple& t) { return t.id == 8; });
        CHECK(shows_u == (q.query.to_string(data->schema()) == "A2=1"));
    }
}

TEST_CASE("candidate tests on table 1") {
    const auto data = table1();
    TopKInterface iface(data, 3);
    QuerySession session(iface);
    const auto top3 = brute_top(*data, 3);
    CHECK(test_candidate(session, top3, tuple_of(*data, 4)));
    CHECK_FALSE(test_candidate(session, top3, tuple_of(*data, 7)));
    // t6 and t7 both pass after t5: neither can be shown to outrank the other
    const auto top5 = brute_top(*data, 5);
    CHECK(test_candidate(session, top5, tuple_of(*data, 6)));
    CHECK(test_candidate(session, top5, tuple_of(*data, 7)));
    CHECK_THROWS(test_candidate(session, top5, tuple_of(*data, 5)));
}

TEST_CASE("miner agrees with exhaustive enumeration") {
    std::mt19937_64 rng(13);
    for (int iter = 0; iter < 400; ++iter) {
        const auto data = random_instance(rng);
        const int k = 2 + static_cast<int>(rng() % 4);
        if (data->size() <= static_cast<std::size_t>(k)) continue;
        const auto h = static_cast<std::size_t>(k) + rng() % (data->size() - static_cast<std::size_t>(k));
        const auto top = brute_top(*data, h);
        const auto& cand = data->in_rank_order()[h + rng() % (data->size() - h)];
        const auto m = data->schema().size();
        const auto cap = std::min(h - static_cast<std::size_t>(k) + 1, m);
        const auto tx = build_transactions(top, cand);
        REQUIRE(minimal_infrequent_itemsets(tx, m, k) == brute_minimal_infrequent(top, cand, k, cap));
        REQUIRE(minimal_infrequent_itemsets(tx, m, k, m) == brute_minimal_infrequent(top, cand, k, m));
    }
}

TEST_CASE("query count and width bounds") {
    std::mt19937_64 rng(17);
    std::size_t checked = 0;
    for (int iter = 0; iter < 300; ++iter) {
        const auto data = random_instance(rng);
        const int k = 2 + static_cast<int>(rng() % 4);
        const auto m = data->schema().size();
        for (auto h = static_cast<std::size_t>(k); h < data->size(); ++h) {
            const auto top = brute_top(*data, h);
            const auto width = h - static_cast<std::size_t>(k) + 1;
            const auto bound = binomial(m, std::min<std::size_t>(width, m / 2));
            for (auto i = h; i < data->size(); ++i) {
                const auto qs = beyond_h_queries(top, data->in_rank_order()[i], k);
                REQUIRE(qs.size() <= bound);
                for (const auto& q : qs) REQUIRE(q.query.size() <= width);
                ++checked;
            }
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("test_candidate agrees with the exhaustive test and the direct-dominator oracle") {
    std::mt19937_64 rng(19);
    std::size_t pairs = 0;
    std::size_t passed = 0;
    for (int iter = 0; iter < 300; ++iter) {
        const auto data = random_instance(rng, {2, 7, 3, 48});
        const int k = 2 + static_cast<int>(rng() % 4);
        if (data->size() <= static_cast<std::size_t>(k)) continue;
        const auto h = static_cast<std::size_t>(k) + rng() % (data->size() - static_cast<std::size_t>(k));
        const auto top = brute_top(*data, h);
        TopKInterface a(data, k);
        TopKInterface b(data, k);
        QuerySession sa(a);
        QuerySession sb(b);
        for (int c = 0; c < 4; ++c) {
            const auto& cand = data->in_rank_order()[h + rng() % (data->size() - h)];
            const bool fast = test_candidate(sa, top, cand);
            REQUIRE(fast == exhaustive_test(sb, top, cand));
            REQUIRE(fast == brute_test(*data, k, top, cand));
            ++pairs;
            passed += fast;
        }
        // the true next tuple always passes
        REQUIRE(test_candidate(sa, top, data->in_rank_order()[h]));
    }
    MESSAGE(pairs << " pairs, " << passed << " passed");
    CHECK(passed > 0);
    CHECK(passed < pairs);
}

TEST_CASE("query ordering") {
    const auto s = Schema::boolean(4);
    std::vector<BeyondHQuery> pool(4);
    pool[0].query = Query(4).set(0, 1).set(1, 1);  // 2 predicates, matches 2 candidates
    pool[0].matched_candidates = {1, 2};
    pool[1].query = Query(4).set(2, 0);  // 1 predicate, matches 1
    pool[1].matched_candidates = {1};
    pool[2].query = Query(4).set(3, 1);  // same score as pool[1], later attribute
    pool[2].matched_candidates = {2};
    pool[3].query = Query(4).set(2, 1);  // same attribute as pool[1], larger value
    pool[3].matched_candidates = {3};
    const auto ordered = order_queries(pool, s, 3);
    CHECK(ordered[0].score == doctest::Approx(2.0 / 3 + 0.25));
    CHECK(ordered[0].query == pool[0].query);
    CHECK(ordered[1].query == pool[1].query);
    CHECK(ordered[2].query == pool[3].query);
    CHECK(ordered[3].query == pool[2].query);
    CHECK(expected_match_fraction(s, pool[0].query) == doctest::Approx(0.25));

    QueryWeights only_selectivity{0.0, 1.0};
    const auto by_sel = order_queries(pool, s, 3, only_selectivity);
    CHECK(by_sel[0].query.size() == 1);
}

TEST_CASE("crawl recovers the whole dataset in a consistent order") {
    std::mt19937_64 rng(23);
    for (int iter = 0; iter < 60; ++iter) {
        const auto data = random_instance(rng);
        const int k = 2 + static_cast<int>(rng() % 4);
        TopKInterface iface(data, k);
        QuerySession session(iface);
        const auto all = crawl_all(session);
        REQUIRE(all.size() == data->size());
        std::set<TupleId> seen;
        for (const auto& t : all) seen.insert(t.id);
        REQUIRE(seen.size() == data->size());
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j)
                REQUIRE_FALSE(session.graph().dominates(all[j].id, all[i].id));
    }
}
