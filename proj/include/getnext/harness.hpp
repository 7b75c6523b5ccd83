#pragma once

// Dataset generation and ingestion, and the experiment runner behind the CLI.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "getnext/core_db.hpp"
#include "getnext/engine.hpp"

namespace getnext {

/// n distinct i.i.d. boolean tuples (each bit is 1 with probability p), ids 1..n.
/// Duplicates are resampled; n == 2^m enumerates the whole cube.
Dataset gen_boolean(std::size_t n, std::size_t m, double p, std::uint64_t seed);

struct RankingSpec {
    enum class Kind { Random, Attribute, Explicit };
    Kind kind = Kind::Random;
    std::uint64_t seed = 0;
    std::string attribute;
    SortDirection direction = SortDirection::Descending;

    /// "random[:seed]", "attribute:NAME[:asc|desc]" or "explicit".
    static RankingSpec parse(const std::string& text);
    static RankingSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct LoadedCsv {
    Dataset dataset;
    /// Present when the file carries the reserved `__rank__` column.
    std::optional<ExplicitPermutation> explicit_ranking;
};

inline constexpr const char* kRankColumn = "__rank__";
inline constexpr std::size_t kDefaultBins = 8;

/// Reads a headed CSV. Columns whose values all parse as numbers and take more than `bins`
/// distinct values are cut into equi-width bins; other columns stay categorical.
LoadedCsv load_csv(const std::filesystem::path& path, std::size_t bins = kDefaultBins);
LoadedCsv parse_csv(std::istream& in, std::size_t bins = kDefaultBins);

/// Writes a dataset (optionally with its ranks in `__rank__`) in the format load_csv reads.
void write_csv(std::ostream& out, const Dataset& data, const RankedDataset* ranks = nullptr);

/// Resolves a ranking spec against a dataset. Explicit ranking needs `explicit_ranking`.
std::shared_ptr<const RankedDataset> rank_dataset(Dataset data, const RankingSpec& spec,
                                                  const std::optional<ExplicitPermutation>& explicit_ranking = {});

struct SyntheticSpec {
    std::vector<std::size_t> n{10000};
    std::size_t m = 16;
    std::vector<double> p{0.5};
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::string> csv_path;
    std::size_t bins = kDefaultBins;
    /// Synthetic data defaults to a random ranking seeded per repetition.
    std::optional<RankingSpec> ranking;
    std::vector<int> k{10};
    std::vector<std::size_t> h{20};
    std::vector<Algorithm> algorithms{Algorithm::Ordered};
    std::size_t repetitions = 1;
    std::string output = "results.csv";
    /// attribute name -> value label, prefixed to every query.
    std::vector<std::pair<std::string, std::string>> constraint;
    std::size_t threads = 1;
    /// Off by default so reruns are byte-identical; wall_ms is then written as 0.
    bool timing = false;
    QueryWeights weights;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Throws ValidationError on empty sweeps, repetitions < 1, p outside (0,1) and similar.
    void validate() const;
};

struct ExperimentRow {
    std::string dataset;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::optional<double> p;
    int k = 0;
    std::size_t h = 0;
    Algorithm algorithm = Algorithm::Ordered;
    std::size_t rep = 0;
    std::int64_t cost_total = 0;
    std::int64_t cost_gen = 0;
    std::int64_t cost_test = 0;
    std::optional<double> kendall_tau;
    double wall_ms = 0.0;
    /// Set when the cell failed; costs are then blank in the CSV.
    std::optional<std::string> error;
};

inline constexpr const char* kExperimentHeader =
    "dataset,seed,n,m,p,k,h,algorithm,rep,cost_total,cost_gen,cost_test,kendall_tau,wall_ms";

std::string format_row(const ExperimentRow& row);

/// Runs every (dataset, k, h, algorithm, repetition) cell on a fresh interface. Rows come back
/// (and are passed to `sink`) in a fixed order regardless of the thread count.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                          const std::function<void(const ExperimentRow&)>& sink = {});

/// run_experiment writing the header and each row to `config.output` as it completes.
std::vector<ExperimentRow> run_experiment_to_file(const ExperimentConfig& config);

}  // namespace getnext
