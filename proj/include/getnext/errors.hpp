#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace getnext {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Query or tuple does not fit the schema (unknown attribute, value outside domain).
struct SchemaError : Error {
    using Error::Error;
};

/// Malformed input data: duplicates, nulls, bad ranking column.
struct ValidationError : Error {
    using Error::Error;
};

struct NotFoundError : Error {
    using Error::Error;
};

/// More distinct tuples requested than the domain product allows.
struct CapacityError : Error {
    using Error::Error;
};

/// Query results contradict a static total order (a dominance cycle was observed).
struct InconsistentRankingError : Error {
    using Error::Error;
};

class BudgetExceededError : public Error {
public:
    BudgetExceededError(std::int64_t issued, std::int64_t budget)
        : Error("query budget exhausted after " + std::to_string(issued) + " queries (budget " +
                std::to_string(budget) + ")"),
          issued_(issued),
          budget_(budget) {}

    std::int64_t issued() const noexcept { return issued_; }
    std::int64_t budget() const noexcept { return budget_; }

private:
    std::int64_t issued_;
    std::int64_t budget_;
};

}  // namespace getnext
