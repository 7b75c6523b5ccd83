#include "getnext/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace getnext {

namespace {

struct VectorHash {
    std::size_t operator()(const std::vector<Value>& v) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        for (auto x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ULL;
        return h;
    }
};

}  // namespace

Dataset gen_boolean(std::size_t n, std::size_t m, double p, std::uint64_t seed) {
    if (m == 0) {
        throw ValidationError("gen_boolean needs at least one attribute");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("skew p must lie in (0, 1)");
    }
    const bool small = m < 63;
    if (small && n > (std::uint64_t{1} << m)) {
        throw CapacityError("cannot draw " + std::to_string(n) + " distinct tuples from 2^" + std::to_string(m) +
                            " boolean vectors");
    }
    auto schema = Schema::boolean(m);
    std::vector<Tuple> tuples;
    tuples.reserve(n);

    if (small && n == (std::uint64_t{1} << m)) {
        for (std::uint64_t code = 0; code < n; ++code) {
            Tuple t{static_cast<TupleId>(code + 1), std::vector<Value>(m)};
            for (std::size_t a = 0; a < m; ++a) t.values[a] = static_cast<Value>((code >> (m - 1 - a)) & 1U);
            tuples.push_back(std::move(t));
        }
        return Dataset(std::move(schema), std::move(tuples));
    }

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bit(p);
    std::unordered_set<std::vector<Value>, VectorHash> seen;
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(n, 1) + 100000;
    std::size_t attempts = 0;
    std::vector<Value> v(m);
    while (tuples.size() < n) {
        if (++attempts > max_attempts) {
            throw CapacityError("could not draw " + std::to_string(n) + " distinct tuples at p=" +
                                std::to_string(p) + "; lower n or move p towards 0.5");
        }
        for (auto& x : v) x = bit(rng) ? 1 : 0;
        if (seen.insert(v).second) {
            tuples.push_back({static_cast<TupleId>(tuples.size() + 1), v});
        }
    }
    return Dataset(std::move(schema), std::move(tuples));
}

// ---------------------------------------------------------------------------

RankingSpec RankingSpec::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string piece; std::getline(ss, piece, ':');) parts.push_back(piece);
    if (parts.empty()) {
        throw ValidationError("empty ranking spec");
    }
    RankingSpec spec;
    if (parts[0] == "random") {
        spec.kind = Kind::Random;
        if (parts.size() > 1) spec.seed = std::stoull(parts[1]);
    } else if (parts[0] == "attribute") {
        if (parts.size() < 2 || parts[1].empty()) {
            throw ValidationError("attribute ranking needs a column name: attribute:NAME[:asc|desc]");
        }
        spec.kind = Kind::Attribute;
        spec.attribute = parts[1];
        if (parts.size() > 2) {
            if (parts[2] == "asc") spec.direction = SortDirection::Ascending;
            else if (parts[2] == "desc") spec.direction = SortDirection::Descending;
            else throw ValidationError("ranking direction must be asc or desc, got '" + parts[2] + "'");
        }
    } else if (parts[0] == "explicit") {
        spec.kind = Kind::Explicit;
    } else {
        throw ValidationError("unknown ranking '" + parts[0] + "' (expected random, attribute or explicit)");
    }
    return spec;
}

RankingSpec RankingSpec::from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        return parse(j.get<std::string>());
    }
    const auto type = j.value("type", std::string("random"));
    RankingSpec spec = parse(type == "attribute" ? "attribute:" + j.value("attribute", std::string()) : type);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("direction")) {
        const auto d = j.at("direction").get<std::string>();
        if (d != "asc" && d != "desc") throw ValidationError("ranking direction must be asc or desc");
        spec.direction = d == "asc" ? SortDirection::Ascending : SortDirection::Descending;
    }
    return spec;
}

nlohmann::json RankingSpec::to_json() const {
    switch (kind) {
        case Kind::Random: return {{"type", "random"}, {"seed", seed}};
        case Kind::Attribute:
            return {{"type", "attribute"},
                    {"attribute", attribute},
                    {"direction", direction == SortDirection::Ascending ? "asc" : "desc"}};
        case Kind::Explicit: return {{"type", "explicit"}};
    }
    return {};
}

std::shared_ptr<const RankedDataset> rank_dataset(Dataset data, const RankingSpec& spec,
                                                  const std::optional<ExplicitPermutation>& explicit_ranking) {
    switch (spec.kind) {
        case RankingSpec::Kind::Random:
            return std::make_shared<const RankedDataset>(std::move(data), SeededRandomOrder{spec.seed});
        case RankingSpec::Kind::Attribute: {
            auto a = data.schema().find(spec.attribute);
            if (!a) {
                throw ValidationError("unknown ranking column '" + spec.attribute + "'");
            }
            return std::make_shared<const RankedDataset>(std::move(data), SortByAttribute{*a, spec.direction});
        }
        case RankingSpec::Kind::Explicit:
            if (!explicit_ranking) {
                throw ValidationError(std::string("explicit ranking needs a ") + kRankColumn + " column");
            }
            return std::make_shared<const RankedDataset>(std::move(data), *explicit_ranking);
    }
    throw ValidationError("unhandled ranking kind");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

/// One record per call; handles quoted fields, doubled quotes and CRLF. Returns false at EOF.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) {
        return false;
    }
    ++line;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (int c; (c = in.get()) != std::char_traits<char>::eof();) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(static_cast<char>(c));
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field.push_back(static_cast<char>(c));
        }
    }
    if (quoted) {
        throw ValidationError("line " + std::to_string(line) + ": unterminated quoted field");
    }
    fields.push_back(std::move(field));
    return any;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

bool is_null_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "NULL" || s == "null" || s == "NaN";
}

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

LoadedCsv parse_csv(std::istream& in, std::size_t bins) {
    if (bins < 2) {
        throw ValidationError("numeric binning needs at least 2 bins");
    }
    std::size_t line = 0;
    std::vector<std::string> header;
    if (!read_record(in, header, line)) {
        throw ValidationError("CSV file is empty");
    }
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    for (auto& h : header) h = trim(h);

    std::optional<std::size_t> rank_col;
    std::vector<std::size_t> attr_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == kRankColumn) {
            if (rank_col) throw ValidationError(std::string("duplicate ") + kRankColumn + " column");
            rank_col = c;
        } else {
            attr_cols.push_back(c);
        }
    }
    if (attr_cols.empty()) {
        throw ValidationError("CSV has no attribute columns");
    }

    std::vector<std::vector<std::string>> cells;  // per row, attribute cells only
    std::vector<std::size_t> lines;
    std::vector<std::int64_t> ranks;
    std::vector<std::string> record;
    while (true) {
        const auto start = line + 1;
        if (!read_record(in, record, line)) break;
        if (record.size() == 1 && trim(record[0]).empty()) continue;  // blank line
        if (record.size() != header.size()) {
            throw ValidationError("line " + std::to_string(start) + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(record.size()));
        }
        std::vector<std::string> row;
        for (auto c : attr_cols) {
            auto v = trim(record[c]);
            if (is_null_token(v)) {
                throw ValidationError("line " + std::to_string(start) + ", column '" + header[c] +
                                      "': missing value");
            }
            row.push_back(std::move(v));
        }
        if (rank_col) {
            const auto text = trim(record[*rank_col]);
            std::int64_t r = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), r);
            if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || r < 1) {
                throw ValidationError("line " + std::to_string(start) + ", column '" + std::string(kRankColumn) +
                                      "': rank must be a positive integer");
            }
            ranks.push_back(r);
        }
        cells.push_back(std::move(row));
        lines.push_back(start);
    }
    if (cells.empty()) {
        throw ValidationError("CSV has a header but no rows");
    }

    // Column domains: categorical labels, or numeric bins when there are too many distinct numbers.
    std::vector<Attribute> attributes;
    std::vector<std::function<std::string(const std::string&)>> to_label;
    for (std::size_t c = 0; c < attr_cols.size(); ++c) {
        bool numeric = true;
        std::vector<double> numbers;
        std::set<std::string> labels;
        for (const auto& row : cells) {
            labels.insert(row[c]);
            if (numeric) {
                if (auto v = parse_number(row[c])) numbers.push_back(*v);
                else numeric = false;
            }
        }
        Attribute attr{header[attr_cols[c]], {}};
        std::set<double> distinct(numbers.begin(), numbers.end());
        if (numeric && distinct.size() > bins) {
            const double lo = *distinct.begin();
            const double hi = *distinct.rbegin();
            const double width = (hi - lo) / static_cast<double>(bins);
            std::vector<std::string> names;
            for (std::size_t b = 0; b < bins; ++b) {
                const double from = lo + width * static_cast<double>(b);
                const double to = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
                names.push_back("[" + format_number(from) + "," + format_number(to) + (b + 1 == bins ? "]" : ")"));
            }
            attr.domain = names;
            to_label.emplace_back([lo, width, bins, names](const std::string& s) {
                const double v = *parse_number(s);
                auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
                return names[std::min(b, bins - 1)];
            });
        } else {
            std::vector<std::string> domain(labels.begin(), labels.end());
            if (numeric) {
                std::stable_sort(domain.begin(), domain.end(),
                                 [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
            }
            if (domain.size() < 2) {
                // a constant column still needs a two-value domain to form a valid schema
                domain.push_back(domain.front() == "__other__" ? "__other2__" : "__other__");
            }
            attr.domain = std::move(domain);
            to_label.emplace_back([](const std::string& s) { return s; });
        }
        attributes.push_back(std::move(attr));
    }
    Schema schema(std::move(attributes));

    std::vector<Tuple> tuples;
    tuples.reserve(cells.size());
    std::map<std::vector<Value>, std::size_t> first_line;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        Tuple t{static_cast<TupleId>(r + 1), std::vector<Value>(attr_cols.size())};
        for (std::size_t c = 0; c < attr_cols.size(); ++c) {
            t.values[c] = schema.value_of(c, to_label[c](cells[r][c]));
        }
        auto [it, inserted] = first_line.emplace(t.values, lines[r]);
        if (!inserted) {
            throw ValidationError("line " + std::to_string(lines[r]) + " duplicates line " +
                                  std::to_string(it->second) + " after discretization");
        }
        tuples.push_back(std::move(t));
    }

    LoadedCsv out{Dataset(std::move(schema), std::move(tuples)), std::nullopt};
    if (rank_col) {
        ExplicitPermutation perm;
        std::map<std::int64_t, std::size_t> used;
        for (std::size_t r = 0; r < ranks.size(); ++r) {
            auto [it, inserted] = used.emplace(ranks[r], lines[r]);
            if (!inserted) {
                throw ValidationError("line " + std::to_string(lines[r]) + ": rank " + std::to_string(ranks[r]) +
                                      " already used on line " + std::to_string(it->second));
            }
            perm.rank_by_id.emplace(static_cast<TupleId>(r + 1), ranks[r]);
        }
        out.explicit_ranking = std::move(perm);
    }
    return out;
}

LoadedCsv load_csv(const std::filesystem::path& path, std::size_t bins) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path.string());
    }
    return parse_csv(in, bins);
}

void write_csv(std::ostream& out, const Dataset& data, const RankedDataset* ranks) {
    const auto& schema = data.schema();
    for (AttrIndex a = 0; a < schema.size(); ++a) {
        out << (a ? "," : "") << quote_csv(schema.attribute(a).name);
    }
    if (ranks) out << ',' << kRankColumn;
    out << '\n';
    for (const auto& t : data.tuples()) {
        for (AttrIndex a = 0; a < schema.size(); ++a) {
            out << (a ? "," : "") << quote_csv(schema.label(a, t.values[a]));
        }
        if (ranks) out << ',' << *ranks->rank_of_id(t.id);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration

namespace {

template <typename T>
std::vector<T> scalar_or_list(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"dataset", "ranking", "k", "h", "algorithms", "algorithm", "repetitions",
                                             "output", "constraint", "threads", "timing", "weights"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ValidationError("unknown config field '" + key + "'");
    }
    ExperimentConfig c;
    try {
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            const auto type = d.value("type", std::string("synthetic"));
            if (type == "synthetic") {
                SyntheticSpec s;
                s.n = scalar_or_list<std::size_t>(d, "n", s.n);
                s.m = d.value("m", s.m);
                s.p = scalar_or_list<double>(d, "p", s.p);
                s.seed = d.value("seed", s.seed);
                c.synthetic = s;
            } else if (type == "csv") {
                c.csv_path = d.at("path").get<std::string>();
                c.bins = d.value("bins", c.bins);
            } else {
                throw ValidationError("dataset type must be synthetic or csv");
            }
        } else {
            c.synthetic = SyntheticSpec{};
        }
        if (j.contains("ranking")) c.ranking = RankingSpec::from_json(j.at("ranking"));
        c.k = scalar_or_list<int>(j, "k", c.k);
        c.h = scalar_or_list<std::size_t>(j, "h", c.h);
        const char* algo_key = j.contains("algorithms") ? "algorithms" : "algorithm";
        if (j.contains(algo_key)) {
            c.algorithms.clear();
            for (const auto& name : scalar_or_list<std::string>(j, algo_key, {})) {
                c.algorithms.push_back(parse_algorithm(name));
            }
        }
        c.repetitions = j.value("repetitions", c.repetitions);
        c.output = j.value("output", c.output);
        if (j.contains("constraint")) {
            for (const auto& [attr, value] : j.at("constraint").items()) {
                c.constraint.emplace_back(attr, value.is_string() ? value.get<std::string>() : value.dump());
            }
        }
        c.threads = j.value("threads", c.threads);
        c.timing = j.value("timing", c.timing);
        if (j.contains("weights")) {
            c.weights.candidates = j.at("weights").value("candidates", c.weights.candidates);
            c.weights.selectivity = j.at("weights").value("selectivity", c.weights.selectivity);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    c.validate();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    if (synthetic) {
        j["dataset"] = {{"type", "synthetic"}, {"n", synthetic->n}, {"m", synthetic->m}, {"p", synthetic->p},
                        {"seed", synthetic->seed}};
    } else if (csv_path) {
        j["dataset"] = {{"type", "csv"}, {"path", *csv_path}, {"bins", bins}};
    }
    if (ranking) j["ranking"] = ranking->to_json();
    j["k"] = k;
    j["h"] = h;
    j["algorithms"] = nlohmann::json::array();
    for (auto a : algorithms) j["algorithms"].push_back(std::string(getnext::to_string(a)));
    j["repetitions"] = repetitions;
    j["output"] = output;
    j["constraint"] = nlohmann::json::object();
    for (const auto& [a, v] : constraint) j["constraint"][a] = v;
    j["threads"] = threads;
    j["timing"] = timing;
    j["weights"] = {{"candidates", weights.candidates}, {"selectivity", weights.selectivity}};
    return j;
}

void ExperimentConfig::validate() const {
    if (synthetic.has_value() == csv_path.has_value()) {
        throw ValidationError("config needs exactly one dataset: synthetic or csv");
    }
    if (synthetic) {
        if (synthetic->n.empty() || synthetic->p.empty()) throw ValidationError("n and p sweeps must be non-empty");
        if (synthetic->m == 0 || synthetic->m > kMaxItems) throw ValidationError("m must lie in [1, 64]");
        for (double p : synthetic->p) {
            if (!(p > 0.0 && p < 1.0)) throw ValidationError("p must lie in (0, 1)");
        }
        for (auto n : synthetic->n) {
            if (n == 0) throw ValidationError("n must be positive");
        }
    }
    if (k.empty() || h.empty() || algorithms.empty()) {
        throw ValidationError("k, h and algorithm sweeps must be non-empty");
    }
    for (int kk : k) {
        if (kk < 2) throw ValidationError("k must be at least 2");
    }
    for (auto hh : h) {
        if (hh == 0) throw ValidationError("h must be at least 1");
    }
    if (repetitions < 1) throw ValidationError("repetitions must be at least 1");
    if (threads < 1) throw ValidationError("threads must be at least 1");
    if (bins < 2) throw ValidationError("bins must be at least 2");
}

std::string format_row(const ExperimentRow& row) {
    std::ostringstream os;
    os << quote_csv(row.dataset) << ',' << row.seed << ',' << row.n << ',' << row.m << ',';
    if (row.p) os << format_number(*row.p);
    os << ',' << row.k << ',' << row.h << ',' << to_string(row.algorithm) << ',' << row.rep << ',';
    if (row.error) {
        // costs unknown; the failure text goes where a number would be
        os << ",,," << quote_csv("error: " + *row.error) << ',';
    } else {
        os << row.cost_total << ',' << row.cost_gen << ',' << row.cost_test << ',';
        if (row.kendall_tau) os << std::fixed << std::setprecision(4) << *row.kendall_tau << std::defaultfloat;
        os << ',';
    }
    os << std::fixed << std::setprecision(3) << row.wall_ms;
    return os.str();
}

// ---------------------------------------------------------------------------
// Experiment execution

namespace {

struct DatasetPoint {
    std::string name;
    std::size_t n = 0;
    std::optional<double> p;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
};

struct Cell {
    std::size_t dataset_index = 0;
    int k = 0;
    std::size_t h = 0;
    Algorithm algorithm = Algorithm::Ordered;
};

ExperimentRow run_cell(const ExperimentConfig& config, const DatasetPoint& point,
                       const std::shared_ptr<const RankedDataset>& data, const Cell& cell) {
    ExperimentRow row;
    row.dataset = point.name;
    row.seed = point.seed;
    row.n = point.n;
    row.m = data ? data->schema().size() : 0;
    row.p = point.p;
    row.k = cell.k;
    row.h = cell.h;
    row.algorithm = cell.algorithm;
    row.rep = point.rep;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (!data) throw Error("dataset could not be built");
        TopKInterface iface(data, cell.k);
        RankOracle oracle(data);
        EngineOptions options;
        options.algorithm = cell.algorithm;
        options.seed = point.seed;
        options.weights = config.weights;
        ExtractionReport report;
        if (config.constraint.empty()) {
            report = get_top_h(iface, cell.h, options, &oracle);
        } else {
            const auto q = Query::from_labels(data->schema(), config.constraint);
            report = get_top_h_constrained(iface, q, cell.h, options, &oracle);
        }
        row.cost_total = report.query_cost_total;
        row.cost_gen = report.query_cost_generation;
        row.cost_test = report.query_cost_testing;
        row.kendall_tau = report.kendall_tau_expected;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    if (config.timing) {
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return row;
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                          const std::function<void(const ExperimentRow&)>& sink) {
    config.validate();

    std::vector<DatasetPoint> points;
    std::vector<std::function<std::shared_ptr<const RankedDataset>()>> builders;
    if (config.synthetic) {
        const auto& s = *config.synthetic;
        for (auto n : s.n) {
            for (double p : s.p) {
                for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
                    const auto seed = s.seed + rep;
                    points.push_back({"synthetic", n, p, rep, seed});
                    builders.emplace_back([&config, n, p, seed, m = s.m] {
                        auto spec = config.ranking.value_or(RankingSpec{});
                        if (!config.ranking) spec.seed = seed;
                        return rank_dataset(gen_boolean(n, m, p, seed), spec);
                    });
                }
            }
        }
    } else {
        auto loaded = std::make_shared<LoadedCsv>(load_csv(*config.csv_path, config.bins));
        RankingSpec spec;
        if (config.ranking) spec = *config.ranking;
        else if (loaded->explicit_ranking) spec.kind = RankingSpec::Kind::Explicit;
        auto ranked = rank_dataset(loaded->dataset, spec, loaded->explicit_ranking);
        const auto name = std::filesystem::path(*config.csv_path).stem().string();
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
            points.push_back({name, ranked->size(), std::nullopt, rep, static_cast<std::uint64_t>(rep + 1)});
            builders.emplace_back([ranked] { return ranked; });
        }
    }

    std::vector<Cell> cells;
    for (std::size_t d = 0; d < points.size(); ++d) {
        for (int k : config.k)
            for (auto h : config.h)
                for (auto a : config.algorithms) cells.push_back({d, k, h, a});
    }

    std::vector<std::optional<ExperimentRow>> slots(cells.size());
    std::vector<ExperimentRow> rows;
    rows.reserve(cells.size());
    std::mutex mutex;
    std::size_t next_to_emit = 0;

    // Datasets are built lazily and shared by the cells that use them.
    std::vector<std::shared_ptr<const RankedDataset>> built(points.size());
    std::vector<std::once_flag> once(points.size());
    auto dataset_for = [&](std::size_t d) {
        // a throwing builder leaves the flag unset, so every cell of that dataset reports the error
        std::call_once(once[d], [&] { built[d] = builders[d](); });
        return built[d];
    };

    std::atomic<std::size_t> next_cell{0};
    auto worker = [&] {
        for (std::size_t i; (i = next_cell.fetch_add(1)) < cells.size();) {
            const auto& cell = cells[i];
            std::shared_ptr<const RankedDataset> data;
            std::optional<std::string> build_error;
            try {
                data = dataset_for(cell.dataset_index);
            } catch (const std::exception& e) {
                build_error = e.what();
            }
            auto row = run_cell(config, points[cell.dataset_index], data, cell);
            if (build_error) row.error = *build_error;
            std::lock_guard lock(mutex);
            slots[i] = std::move(row);
            // Emit in cell order so the output never depends on scheduling.
            while (next_to_emit < slots.size() && slots[next_to_emit]) {
                if (sink) sink(*slots[next_to_emit]);
                rows.push_back(std::move(*slots[next_to_emit]));
                slots[next_to_emit].reset();
                ++next_to_emit;
            }
        }
    };

    const auto thread_count = std::min(config.threads, std::max<std::size_t>(cells.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < thread_count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

std::vector<ExperimentRow> run_experiment_to_file(const ExperimentConfig& config) {
    std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw NotFoundError("cannot write " + config.output);
    }
    out << kExperimentHeader << '\n' << std::flush;
    return run_experiment(config, [&out](const ExperimentRow& row) { out << format_row(row) << '\n' << std::flush; });
}

}  // namespace getnext
