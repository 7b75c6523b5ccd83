#pragma once

// GetNext algorithms and iterative top-h extraction.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "getnext/candidate_generation.hpp"
#include "getnext/candidate_testing.hpp"
#include "getnext/core_db.hpp"
#include "getnext/state.hpp"

namespace getnext {

enum class Algorithm { BeyondH, Ordered };

std::string_view to_string(Algorithm a);
/// Accepts "beyond-h" and "ordered".
Algorithm parse_algorithm(std::string_view name);

struct EngineOptions {
    Algorithm algorithm = Algorithm::Ordered;
    std::uint64_t seed = 0;
    QueryWeights weights;
    GenerationOptions generation;
    /// Linearizations averaged for the expected Kendall tau of uncertain outputs.
    std::size_t tau_samples = 100;
};

/// Issues the initial SELECT * and seeds the verified prefix with its (certain) results.
void bootstrap(GetNextState& state);

/// Uniform seeded pick among mutually incomparable survivors. Returns the pick and whether the
/// choice was forced (a single survivor).
std::pair<Tuple, bool> resolve_tie(GetNextState& state, std::vector<Tuple> nondominated);

/// BEYOND-h-GETNEXT: test every candidate with its beyond-h queries.
std::optional<Tuple> get_next_beyond_h(GetNextState& state, const EngineOptions& options = {});

/// ORDERED-GETNEXT: pool all candidates' beyond-h queries, order them by elimination power and
/// execute until a single candidate survives.
std::optional<Tuple> get_next_ordered(GetNextState& state, const EngineOptions& options = {});

std::optional<Tuple> get_next(GetNextState& state, const EngineOptions& options);

struct ExtractionReport {
    std::vector<Tuple> tuples;
    std::vector<bool> certainty_flags;
    std::int64_t query_cost_total = 0;
    std::int64_t query_cost_generation = 0;
    std::int64_t query_cost_testing = 0;
    std::optional<double> kendall_tau_expected;
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::Ordered;
    int k = 0;
    std::size_t h_requested = 0;
    /// Fewer than h tuples exist (within the constraint, if any).
    bool exhausted = false;
};

/// Drives GetNext from a bootstrapped state until h tuples are emitted or the data runs out.
class Extraction {
public:
    Extraction(TopKSource& source, EngineOptions options);

    /// Extends the output to min(h, n) tuples.
    void extend_to(std::size_t h);
    /// The next tuple not yet returned by next(); std::nullopt once the database is exhausted.
    std::optional<Tuple> next();

    ExtractionReport report(std::size_t h_requested) const;

    const GetNextState& state() const noexcept { return state_; }
    GetNextState& state() noexcept { return state_; }
    bool exhausted() const noexcept { return exhausted_; }

private:
    bool advance();

    TopKSource& source_;
    EngineOptions options_;
    GetNextState state_;
    std::int64_t start_count_;
    std::size_t emitted_ = 0;
    bool exhausted_ = false;
};

/// get_top_h. When `oracle` is given and some position is uncertain, the report carries the
/// expected Kendall tau between random linear extensions of the output and the true order.
ExtractionReport get_top_h(TopKSource& iface, std::size_t h, const EngineOptions& options = {},
                           const RankOracle* oracle = nullptr);

/// Selectivity-constrained extraction: the constraint is prefixed to every issued query.
ExtractionReport get_top_h_constrained(TopKSource& iface, const Query& constraint, std::size_t h,
                                       const EngineOptions& options = {}, const RankOracle* oracle = nullptr);

/// Fallback for constraints the interface cannot express: extract unconstrained tuples until
/// h of them satisfy `filter`. The report lists only the matching tuples.
ExtractionReport get_top_h_postfiltered(TopKSource& iface, const Query& filter, std::size_t h,
                                        const EngineOptions& options = {});

/// Number of discordant pairs between two rankings of the same element set (O(n log n)).
std::int64_t kendall_tau(std::span<const TupleId> a, std::span<const TupleId> b);

/// Output positions known to be ordered: a certain prefix precedes everything after it, and
/// observed dominance orders the rest. before[i][j] is true when position i must precede j.
std::vector<std::vector<bool>> known_precedence(const GetNextState& state, std::span<const Tuple> output,
                                                const std::vector<bool>& certainty);

/// True when `output` never places a tuple after one it is known to dominate.
bool is_linear_extension(const DominanceGraph& graph, std::span<const Tuple> output);

/// Mean Kendall tau between `samples` seeded random linear extensions of the known order on
/// `output` and the true order of the same tuples.
double expected_kendall_tau(const std::vector<std::vector<bool>>& before, std::span<const Tuple> output,
                            const RankOracle& oracle, std::size_t samples, std::uint64_t seed);

nlohmann::json to_json(const ExtractionReport& report, const Schema& schema);

}  // namespace getnext
