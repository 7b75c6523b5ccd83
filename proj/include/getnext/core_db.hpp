#pragma once

// Data model and the simulated hidden database: a table of categorical tuples
// under a static ranking, reachable only through a top-k conjunctive query
// interface that counts every query it answers.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "getnext/errors.hpp"

namespace getnext {

using Value = std::int32_t;
using AttrIndex = std::size_t;
using TupleId = std::int64_t;

/// Slot value of a query attribute that carries no predicate.
inline constexpr Value kAnyValue = -1;

struct Attribute {
    std::string name;
    std::vector<std::string> domain;

    friend bool operator==(const Attribute&, const Attribute&) = default;
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<Attribute> attributes);

    /// m boolean attributes named A1..Am with domain {"0", "1"}.
    static Schema boolean(std::size_t m);

    std::size_t size() const noexcept { return attributes_.size(); }
    const Attribute& attribute(AttrIndex a) const { return attributes_.at(a); }
    const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    std::size_t domain_size(AttrIndex a) const { return attributes_.at(a).domain.size(); }

    std::optional<AttrIndex> find(std::string_view name) const;
    AttrIndex index_of(std::string_view name) const;
    Value value_of(AttrIndex a, std::string_view label) const;
    const std::string& label(AttrIndex a, Value v) const;

    /// Product of domain sizes, saturating at UINT64_MAX.
    std::uint64_t capacity() const noexcept;

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::vector<Attribute> attributes_;
};

struct Tuple {
    TupleId id = 0;
    std::vector<Value> values;

    friend bool operator==(const Tuple&, const Tuple&) = default;
};

// ---------------------------------------------------------------------------
// Ranking functions. Rank 1 is the best tuple.

enum class SortDirection { Ascending, Descending };

/// Rank per tuple id, given explicitly (e.g. the reserved `__rank__` CSV column).
struct ExplicitPermutation {
    std::map<TupleId, std::int64_t> rank_by_id;
};

/// Orders by one attribute's domain position; ties broken by tuple id ascending.
struct SortByAttribute {
    AttrIndex attribute = 0;
    SortDirection direction = SortDirection::Ascending;
};

struct SeededRandomOrder {
    std::uint64_t seed = 0;
};

using RankingFunction = std::variant<ExplicitPermutation, SortByAttribute, SeededRandomOrder>;

class Dataset {
public:
    Dataset() = default;
    /// Validates values against the schema, id uniqueness and pairwise-distinct value vectors.
    Dataset(Schema schema, std::vector<Tuple> tuples);

    const Schema& schema() const noexcept { return schema_; }
    const std::vector<Tuple>& tuples() const noexcept { return tuples_; }
    std::size_t size() const noexcept { return tuples_.size(); }
    const Tuple* find(TupleId id) const;

private:
    Schema schema_;
    std::vector<Tuple> tuples_;
    std::map<TupleId, std::size_t> index_;
};

/// A dataset frozen together with the strict total order its ranking function induces.
class RankedDataset {
public:
    RankedDataset(Dataset dataset, const RankingFunction& ranking);

    const Dataset& dataset() const noexcept { return dataset_; }
    const Schema& schema() const noexcept { return dataset_.schema(); }
    std::size_t size() const noexcept { return dataset_.size(); }

    /// Tuples sorted best first.
    std::span<const Tuple> in_rank_order() const noexcept { return ordered_; }

    /// 1-based rank, or std::nullopt for unknown ids.
    std::optional<std::int64_t> rank_of_id(TupleId id) const;

private:
    Dataset dataset_;
    std::vector<Tuple> ordered_;
    std::map<TupleId, std::int64_t> rank_;
};

/// Ground truth for tests and experiment scoring. Never handed to extraction algorithms.
class RankOracle {
public:
    explicit RankOracle(std::shared_ptr<const RankedDataset> data) : data_(std::move(data)) {}

    /// Rank of a tuple matched by id and values; throws NotFoundError otherwise.
    std::int64_t rank_of(const Tuple& t) const;

    /// Ids of the best `count` tuples (all of them when count exceeds n).
    std::vector<TupleId> top_ids(std::size_t count) const;

    const RankedDataset& data() const noexcept { return *data_; }

private:
    std::shared_ptr<const RankedDataset> data_;
};

// ---------------------------------------------------------------------------
// Queries

/// Conjunction of equality predicates, one optional slot per schema attribute.
class Query {
public:
    Query() = default;
    explicit Query(std::size_t num_attributes) : slots_(num_attributes, kAnyValue) {}

    static Query select_all(std::size_t num_attributes) { return Query(num_attributes); }

    /// Builds a query from attribute-name -> value-label pairs; throws SchemaError.
    static Query from_labels(const Schema& schema,
                             const std::vector<std::pair<std::string, std::string>>& predicates);

    Query& set(AttrIndex a, Value v);
    Query& clear(AttrIndex a);

    bool has(AttrIndex a) const { return slots_.at(a) != kAnyValue; }
    Value at(AttrIndex a) const { return slots_.at(a); }
    std::size_t num_attributes() const noexcept { return slots_.size(); }

    /// Number of predicates, |S(q)|.
    std::size_t size() const noexcept;
    bool empty() const noexcept { return size() == 0; }

    std::vector<AttrIndex> attributes() const;
    /// Bit i set iff attribute i carries a predicate (requires m <= 64).
    std::uint64_t attribute_mask() const;

    bool matches(std::span<const Value> values) const noexcept;
    bool matches(const Tuple& t) const noexcept { return matches(std::span<const Value>(t.values)); }

    /// Conjunction of both queries; throws SchemaError when they fix an attribute differently.
    Query conjoined(const Query& other) const;

    /// Throws SchemaError if the query has the wrong arity or a value outside its domain.
    void validate(const Schema& schema) const;

    std::string to_string(const Schema& schema) const;

    std::span<const Value> slots() const noexcept { return slots_; }

    friend auto operator<=>(const Query&, const Query&) = default;
    friend bool operator==(const Query&, const Query&) = default;

private:
    std::vector<Value> slots_;
};

enum class ResultStatus { Overflow, Valid, Underflow };

std::string_view to_string(ResultStatus s);

struct QueryResult {
    std::vector<Tuple> tuples;  // rank order, best first
    ResultStatus status = ResultStatus::Underflow;
};

// ---------------------------------------------------------------------------
// Interfaces

/// The only view of a hidden database the extraction algorithms get.
class TopKSource {
public:
    virtual ~TopKSource() = default;

    virtual const Schema& schema() const = 0;
    virtual int k() const = 0;
    virtual QueryResult execute(const Query& q) = 0;
    virtual std::int64_t query_count() const = 0;
};

/// Simulated top-k interface over an in-memory ranked dataset.
class TopKInterface final : public TopKSource {
public:
    TopKInterface(std::shared_ptr<const RankedDataset> data, int k,
                  std::optional<std::int64_t> budget = std::nullopt);

    const Schema& schema() const override { return data_->schema(); }
    int k() const override { return k_; }
    QueryResult execute(const Query& q) override;
    std::int64_t query_count() const override { return count_; }

    std::optional<std::int64_t> budget() const noexcept { return budget_; }

private:
    std::shared_ptr<const RankedDataset> data_;
    int k_;
    std::optional<std::int64_t> budget_;
    std::int64_t count_ = 0;
};

/// Prefixes a fixed selectivity constraint to every query sent to the wrapped source.
class ConstrainedSource final : public TopKSource {
public:
    ConstrainedSource(TopKSource& inner, Query constraint);

    const Schema& schema() const override { return inner_.schema(); }
    int k() const override { return inner_.k(); }
    QueryResult execute(const Query& q) override;
    std::int64_t query_count() const override { return inner_.query_count(); }

    const Query& constraint() const noexcept { return constraint_; }

private:
    TopKSource& inner_;
    Query constraint_;
};

inline QueryResult execute_query(TopKSource& iface, const Query& q) { return iface.execute(q); }

/// Classifies a match count against k.
ResultStatus classify(std::size_t matches, int k) noexcept;

}  // namespace getnext
