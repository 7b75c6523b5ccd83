#include "getnext/core_db.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace getnext {

Schema::Schema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    if (attributes_.empty()) {
        throw SchemaError("schema needs at least one attribute");
    }
    std::set<std::string_view> names;
    for (const auto& a : attributes_) {
        if (!names.insert(a.name).second) {
            throw SchemaError("duplicate attribute name '" + a.name + "'");
        }
        if (a.domain.size() < 2) {
            throw SchemaError("attribute '" + a.name + "' needs at least two domain values");
        }
        std::set<std::string_view> labels(a.domain.begin(), a.domain.end());
        if (labels.size() != a.domain.size()) {
            throw SchemaError("attribute '" + a.name + "' has repeated domain values");
        }
    }
}

Schema Schema::boolean(std::size_t m) {
    std::vector<Attribute> attrs;
    attrs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        attrs.push_back({"A" + std::to_string(i + 1), {"0", "1"}});
    }
    return Schema(std::move(attrs));
}

std::optional<AttrIndex> Schema::find(std::string_view name) const {
    for (AttrIndex i = 0; i < attributes_.size(); ++i) {
        if (attributes_[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

AttrIndex Schema::index_of(std::string_view name) const {
    if (auto i = find(name)) {
        return *i;
    }
    throw SchemaError("unknown attribute '" + std::string(name) + "'");
}

Value Schema::value_of(AttrIndex a, std::string_view label) const {
    const auto& dom = attribute(a).domain;
    auto it = std::find(dom.begin(), dom.end(), label);
    if (it == dom.end()) {
        throw SchemaError("value '" + std::string(label) + "' not in domain of '" + attribute(a).name +
                          "'");
    }
    return static_cast<Value>(it - dom.begin());
}

const std::string& Schema::label(AttrIndex a, Value v) const {
    const auto& dom = attribute(a).domain;
    if (v < 0 || static_cast<std::size_t>(v) >= dom.size()) {
        throw SchemaError("value index " + std::to_string(v) + " outside domain of '" +
                          attribute(a).name + "'");
    }
    return dom[static_cast<std::size_t>(v)];
}

std::uint64_t Schema::capacity() const noexcept {
    std::uint64_t total = 1;
    for (const auto& a : attributes_) {
        const auto d = static_cast<std::uint64_t>(a.domain.size());
        if (total > std::numeric_limits<std::uint64_t>::max() / d) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        total *= d;
    }
    return total;
}

// ---------------------------------------------------------------------------

Dataset::Dataset(Schema schema, std::vector<Tuple> tuples)
    : schema_(std::move(schema)), tuples_(std::move(tuples)) {
    std::set<std::vector<Value>> seen;
    for (std::size_t row = 0; row < tuples_.size(); ++row) {
        const auto& t = tuples_[row];
        if (t.values.size() != schema_.size()) {
            throw SchemaError("tuple " + std::to_string(t.id) + " has " +
                              std::to_string(t.values.size()) + " values, schema has " +
                              std::to_string(schema_.size()));
        }
        for (AttrIndex a = 0; a < t.values.size(); ++a) {
            if (t.values[a] < 0 || static_cast<std::size_t>(t.values[a]) >= schema_.domain_size(a)) {
                throw SchemaError("tuple " + std::to_string(t.id) + " has out-of-domain value for '" +
                                  schema_.attribute(a).name + "'");
            }
        }
        if (!index_.emplace(t.id, row).second) {
            throw ValidationError("duplicate tuple id " + std::to_string(t.id));
        }
        if (!seen.insert(t.values).second) {
            throw ValidationError("tuple " + std::to_string(t.id) + " duplicates an earlier value vector");
        }
    }
}

const Tuple* Dataset::find(TupleId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &tuples_[it->second];
}

// ---------------------------------------------------------------------------

namespace {

struct RankVisitor {
    const Dataset& data;

    std::vector<std::size_t> operator()(const ExplicitPermutation& p) const {
        const auto n = data.size();
        std::vector<std::int64_t> rank(n, 0);
        std::vector<bool> used(n + 1, false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = data.tuples()[i];
            auto it = p.rank_by_id.find(t.id);
            if (it == p.rank_by_id.end()) {
                throw ValidationError("no explicit rank for tuple " + std::to_string(t.id));
            }
            const auto r = it->second;
            if (r < 1 || r > static_cast<std::int64_t>(n) || used[static_cast<std::size_t>(r)]) {
                throw ValidationError("explicit ranks must be a permutation of 1..n (tuple " +
                                      std::to_string(t.id) + " has " + std::to_string(r) + ")");
            }
            used[static_cast<std::size_t>(r)] = true;
            rank[i] = r;
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
        return order;
    }

    std::vector<std::size_t> operator()(const SortByAttribute& s) const {
        if (s.attribute >= data.schema().size()) {
            throw SchemaError("ranking attribute index out of range");
        }
        const auto& ts = data.tuples();
        std::vector<std::size_t> order(ts.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto va = ts[a].values[s.attribute];
            const auto vb = ts[b].values[s.attribute];
            if (va != vb) {
                return s.direction == SortDirection::Ascending ? va < vb : va > vb;
            }
            return ts[a].id < ts[b].id;
        });
        return order;
    }

    std::vector<std::size_t> operator()(const SeededRandomOrder& r) const {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(r.seed);
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    }
};

}  // namespace

RankedDataset::RankedDataset(Dataset dataset, const RankingFunction& ranking)
    : dataset_(std::move(dataset)) {
    const auto order = std::visit(RankVisitor{dataset_}, ranking);
    ordered_.reserve(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& t = dataset_.tuples()[order[pos]];
        ordered_.push_back(t);
        rank_.emplace(t.id, static_cast<std::int64_t>(pos) + 1);
    }
}

std::optional<std::int64_t> RankedDataset::rank_of_id(TupleId id) const {
    auto it = rank_.find(id);
    if (it == rank_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::int64_t RankOracle::rank_of(const Tuple& t) const {
    const auto* stored = data_->dataset().find(t.id);
    if (stored == nullptr || stored->values != t.values) {
        throw NotFoundError("tuple " + std::to_string(t.id) + " is not in the dataset");
    }
    return *data_->rank_of_id(t.id);
}

std::vector<TupleId> RankOracle::top_ids(std::size_t count) const {
    const auto ordered = data_->in_rank_order();
    count = std::min(count, ordered.size());
    std::vector<TupleId> ids;
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ids.push_back(ordered[i].id);
    }
    return ids;
}

// ---------------------------------------------------------------------------

Query Query::from_labels(const Schema& schema,
                         const std::vector<std::pair<std::string, std::string>>& predicates) {
    Query q(schema.size());
    for (const auto& [name, label] : predicates) {
        const auto a = schema.index_of(name);
        if (q.has(a)) {
            throw SchemaError("attribute '" + name + "' appears twice in query");
        }
        q.set(a, schema.value_of(a, label));
    }
    return q;
}

Query& Query::set(AttrIndex a, Value v) {
    slots_.at(a) = v;
    return *this;
}

Query& Query::clear(AttrIndex a) {
    slots_.at(a) = kAnyValue;
    return *this;
}

std::size_t Query::size() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(slots_.begin(), slots_.end(), [](Value v) { return v != kAnyValue; }));
}

std::vector<AttrIndex> Query::attributes() const {
    std::vector<AttrIndex> out;
    for (AttrIndex a = 0; a < slots_.size(); ++a) {
        if (slots_[a] != kAnyValue) {
            out.push_back(a);
        }
    }
    return out;
}

std::uint64_t Query::attribute_mask() const {
    std::uint64_t mask = 0;
    for (AttrIndex a = 0; a < slots_.size() && a < 64; ++a) {
        if (slots_[a] != kAnyValue) {
            mask |= std::uint64_t{1} << a;
        }
    }
    return mask;
}

bool Query::matches(std::span<const Value> values) const noexcept {
    for (std::size_t a = 0; a < slots_.size(); ++a) {
        if (slots_[a] != kAnyValue && slots_[a] != values[a]) {
            return false;
        }
    }
    return true;
}

Query Query::conjoined(const Query& other) const {
    if (other.slots_.size() != slots_.size()) {
        throw SchemaError("cannot conjoin queries over different schemas");
    }
    Query out = *this;
    for (AttrIndex a = 0; a < slots_.size(); ++a) {
        if (other.slots_[a] == kAnyValue) {
            continue;
        }
        if (out.slots_[a] != kAnyValue && out.slots_[a] != other.slots_[a]) {
            throw SchemaError("conjoined queries fix attribute " + std::to_string(a) + " differently");
        }
        out.slots_[a] = other.slots_[a];
    }
    return out;
}

void Query::validate(const Schema& schema) const {
    if (slots_.size() != schema.size()) {
        throw SchemaError("query has " + std::to_string(slots_.size()) + " slots, schema has " +
                          std::to_string(schema.size()) + " attributes");
    }
    for (AttrIndex a = 0; a < slots_.size(); ++a) {
        const auto v = slots_[a];
        if (v != kAnyValue && (v < 0 || static_cast<std::size_t>(v) >= schema.domain_size(a))) {
            throw SchemaError("query value " + std::to_string(v) + " outside domain of '" +
                              schema.attribute(a).name + "'");
        }
    }
}

std::string Query::to_string(const Schema& schema) const {
    std::ostringstream os;
    bool first = true;
    for (AttrIndex a = 0; a < slots_.size(); ++a) {
        if (slots_[a] == kAnyValue) {
            continue;
        }
        os << (first ? "" : " AND ") << schema.attribute(a).name << '=' << schema.label(a, slots_[a]);
        first = false;
    }
    return first ? std::string("SELECT *") : os.str();
}

std::string_view to_string(ResultStatus s) {
    switch (s) {
        case ResultStatus::Overflow: return "overflow";
        case ResultStatus::Valid: return "valid";
        case ResultStatus::Underflow: return "underflow";
    }
    return "unknown";
}

ResultStatus classify(std::size_t matches, int k) noexcept {
    if (matches == 0) {
        return ResultStatus::Underflow;
    }
    return matches > static_cast<std::size_t>(k) ? ResultStatus::Overflow : ResultStatus::Valid;
}

// ---------------------------------------------------------------------------

TopKInterface::TopKInterface(std::shared_ptr<const RankedDataset> data, int k,
                             std::optional<std::int64_t> budget)
    : data_(std::move(data)), k_(k), budget_(budget) {
    if (!data_) {
        throw std::invalid_argument("TopKInterface needs a dataset");
    }
    if (k_ <= 1) {
        throw std::invalid_argument("top-k interface requires k > 1");
    }
    if (budget_ && *budget_ < 0) {
        throw std::invalid_argument("query budget must be non-negative");
    }
}

QueryResult TopKInterface::execute(const Query& q) {
    q.validate(data_->schema());
    if (budget_ && count_ >= *budget_) {
        throw BudgetExceededError(count_, *budget_);
    }
    ++count_;

    std::vector<std::pair<AttrIndex, Value>> predicates;
    for (AttrIndex a : q.attributes()) {
        predicates.emplace_back(a, q.at(a));
    }

    QueryResult result;
    std::size_t matched = 0;
    const auto limit = static_cast<std::size_t>(k_);
    for (const auto& t : data_->in_rank_order()) {
        const bool hit = std::all_of(predicates.begin(), predicates.end(),
                                     [&](const auto& p) { return t.values[p.first] == p.second; });
        if (!hit) {
            continue;
        }
        if (++matched > limit) {
            break;
        }
        result.tuples.push_back(t);
    }
    result.status = classify(matched, k_);
    return result;
}

ConstrainedSource::ConstrainedSource(TopKSource& inner, Query constraint)
    : inner_(inner), constraint_(std::move(constraint)) {
    constraint_.validate(inner_.schema());
}

QueryResult ConstrainedSource::execute(const Query& q) {
    q.validate(inner_.schema());
    for (AttrIndex a : constraint_.attributes()) {
        if (q.has(a) && q.at(a) != constraint_.at(a)) {
            // Contradicts the constraint: provably empty, nothing to send.
            return {};
        }
    }
    return inner_.execute(q.conjoined(constraint_));
}

}  // namespace getnext
