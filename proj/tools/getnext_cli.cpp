// Command-line front end: dataset generation, experiment runs, one-off extractions,
// full crawls and a simulated remote endpoint.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "getnext/engine.hpp"
#include "getnext/harness.hpp"
#include "getnext/remote.hpp"

namespace {

using namespace getnext;

struct DataOptions {
    std::string csv;
    std::size_t n = 10000;
    std::size_t m = 16;
    double p = 0.5;
    std::uint64_t data_seed = 1;
    std::string ranking;
    std::size_t bins = kDefaultBins;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--data", csv, "CSV dataset (otherwise synthetic boolean data)");
        cmd->add_option("--n", n, "synthetic tuple count")->capture_default_str();
        cmd->add_option("--m", m, "synthetic attribute count")->capture_default_str();
        cmd->add_option("--p", p, "probability of a 1 per synthetic attribute")->capture_default_str();
        cmd->add_option("--data-seed", data_seed, "synthetic data seed")->capture_default_str();
        cmd->add_option("--ranking", ranking,
                        "random[:seed] | attribute:NAME[:asc|desc] | explicit (default: explicit when the CSV has "
                        "__rank__, else random seeded by --data-seed)");
        cmd->add_option("--bins", bins, "equi-width bins for numeric CSV columns")->capture_default_str();
    }

    std::shared_ptr<const RankedDataset> build() const {
        if (!csv.empty()) {
            auto loaded = load_csv(csv, bins);
            RankingSpec spec = !ranking.empty()              ? RankingSpec::parse(ranking)
                               : loaded.explicit_ranking     ? RankingSpec{RankingSpec::Kind::Explicit}
                                                             : RankingSpec{};
            return rank_dataset(std::move(loaded.dataset), spec, loaded.explicit_ranking);
        }
        RankingSpec spec = ranking.empty() ? RankingSpec{} : RankingSpec::parse(ranking);
        if (ranking.empty()) spec.seed = data_seed;
        return rank_dataset(gen_boolean(n, m, p, data_seed), spec);
    }
};

std::vector<std::pair<std::string, std::string>> parse_constraint(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("constraint items look like ATTR=VALUE, got '" + item + "'");
        }
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

int cmd_generate(const DataOptions& data, const std::string& out_path, bool with_rank) {
    auto ranked = data.build();
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw NotFoundError("cannot write " + out_path);
    write_csv(out, ranked->dataset(), with_rank ? ranked.get() : nullptr);
    std::cerr << "wrote " << ranked->size() << " tuples to " << out_path << '\n';
    return 0;
}

int cmd_topk(const DataOptions& data, int k, std::size_t h, const std::string& algorithm, std::uint64_t seed,
             const std::string& constraint_text, bool postfilter, const std::string& remote_config) {
    EngineOptions options;
    options.algorithm = parse_algorithm(algorithm);
    options.seed = seed;
    const auto constraint = parse_constraint(constraint_text);

    if (!remote_config.empty()) {
        std::ifstream in(remote_config);
        if (!in) throw NotFoundError("cannot open " + remote_config);
        RemoteTopKSource source(RemoteConfig::from_json(nlohmann::json::parse(in)));
        const auto q = Query::from_labels(source.schema(), constraint);
        const auto report = constraint.empty() ? get_top_h(source, h, options)
                            : postfilter       ? get_top_h_postfiltered(source, q, h, options)
                                               : get_top_h_constrained(source, q, h, options);
        std::cout << to_json(report, source.schema()).dump(2) << '\n';
        return 0;
    }

    auto ranked = data.build();
    TopKInterface iface(ranked, k);
    RankOracle oracle(ranked);
    const auto q = Query::from_labels(ranked->schema(), constraint);
    const auto report = constraint.empty() ? get_top_h(iface, h, options, &oracle)
                        : postfilter       ? get_top_h_postfiltered(iface, q, h, options)
                                           : get_top_h_constrained(iface, q, h, options, &oracle);
    std::cout << to_json(report, ranked->schema()).dump(2) << '\n';
    return 0;
}

int cmd_crawl(const DataOptions& data, int k) {
    auto ranked = data.build();
    TopKInterface iface(ranked, k);
    QuerySession session(iface);
    const auto tuples = crawl_all(session);
    nlohmann::json out = {{"k", k}, {"queries", iface.query_count()}, {"tuples", nlohmann::json::array()}};
    for (const auto& t : tuples) {
        nlohmann::json values = nlohmann::json::array();
        for (AttrIndex a = 0; a < t.values.size(); ++a) values.push_back(ranked->schema().label(a, t.values[a]));
        out["tuples"].push_back({{"id", t.id}, {"values", values}});
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_serve(const DataOptions& data, int k, const std::string& host, int port, const std::string& config_out) {
    SimulatedEndpoint endpoint(data.build(), k);
    if (!config_out.empty()) {
        std::ofstream out(config_out);
        out << endpoint.client_config(host, port).to_json().dump(2) << '\n';
    }
    std::cerr << "serving POST http://" << host << ':' << port << "/query\n";
    endpoint.listen(host, port);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Top-h extraction through top-k query interfaces"};
    app.require_subcommand(1);
    // -h is taken by the extraction depth
    app.set_help_flag("--help", "print help and exit");

    DataOptions gen_data;
    std::string gen_out = "data.csv";
    bool gen_rank = true;
    auto* gen = app.add_subcommand("generate", "write a synthetic boolean dataset as CSV");
    gen_data.add_to(gen);
    gen->add_option("-o,--out", gen_out, "output CSV")->capture_default_str();
    gen->add_flag("!--no-rank", gen_rank, "omit the __rank__ column");

    std::string run_config;
    std::optional<std::string> run_output;
    std::optional<std::size_t> run_reps;
    std::optional<std::size_t> run_threads;
    bool run_timing = false;
    auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
    run->add_option("config", run_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", run_output, "override output CSV path");
    run->add_option("--repetitions", run_reps, "override repetitions");
    run->add_option("--threads", run_threads, "override worker count");
    run->add_flag("--timing", run_timing, "record wall_ms (makes output non-reproducible)");

    DataOptions topk_data;
    int topk_k = 10;
    std::size_t topk_h = 20;
    std::string topk_algo = "ordered";
    std::uint64_t topk_seed = 0;
    std::string topk_constraint;
    bool topk_postfilter = false;
    std::string topk_remote;
    auto* topk = app.add_subcommand("topk", "extract the top h tuples and print the report as JSON");
    topk_data.add_to(topk);
    topk->add_option("--k", topk_k, "interface k")->capture_default_str();
    topk->add_option("--h", topk_h, "tuples to extract")->capture_default_str();
    topk->add_option("--algorithm", topk_algo, "ordered | beyond-h")->capture_default_str();
    topk->add_option("--seed", topk_seed, "tie-break seed")->capture_default_str();
    topk->add_option("--constraint", topk_constraint, "ATTR=VALUE[,ATTR=VALUE...]");
    topk->add_flag("--postfilter", topk_postfilter, "apply the constraint after extraction instead of in queries");
    topk->add_option("--remote-config", topk_remote, "query a remote endpoint described by this JSON file");

    DataOptions crawl_data;
    int crawl_k = 10;
    auto* crawl = app.add_subcommand("crawl-oracle", "crawl the whole dataset through the interface");
    crawl_data.add_to(crawl);
    crawl->add_option("--k", crawl_k, "interface k")->capture_default_str();

    DataOptions serve_data;
    int serve_k = 10;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    std::string serve_config_out;
    auto* serve = app.add_subcommand("serve", "serve a dataset over the remote wire contract");
    serve_data.add_to(serve);
    serve->add_option("--k", serve_k, "interface k")->capture_default_str();
    serve->add_option("--host", serve_host)->capture_default_str();
    serve->add_option("--port", serve_port)->capture_default_str();
    serve->add_option("--write-config", serve_config_out, "write a matching client config here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_data, gen_out, gen_rank);
        if (*run) {
            std::ifstream in(run_config);
            auto config = ExperimentConfig::from_json(nlohmann::json::parse(in));
            if (run_output) config.output = *run_output;
            if (run_reps) config.repetitions = *run_reps;
            if (run_threads) config.threads = *run_threads;
            if (run_timing) config.timing = true;
            const auto rows = run_experiment_to_file(config);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += r.error ? 1 : 0;
            std::cerr << rows.size() << " rows written to " << config.output;
            if (failed) std::cerr << " (" << failed << " failed)";
            std::cerr << '\n';
            return failed ? 2 : 0;
        }
        if (*topk) {
            return cmd_topk(topk_data, topk_k, topk_h, topk_algo, topk_seed, topk_constraint, topk_postfilter,
                            topk_remote);
        }
        if (*crawl) return cmd_crawl(crawl_data, crawl_k);
        if (*serve) return cmd_serve(serve_data, serve_k, serve_host, serve_port, serve_config_out);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
