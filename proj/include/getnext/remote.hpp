#pragma once

// Remote top-k endpoint connector and a simulated endpoint serving a local dataset.
//
// Wire contract, HTTP POST with JSON bodies:
//   request  {"predicates": {"<attribute>": "<value label>", ...}}
//   response {"status": "overflow" | "valid" | "underflow", "tuples": [["<label>", ...], ...]}
// Tuples arrive best first with one label per schema attribute, in schema order.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <string>
#include <vector>

#include "json.hpp"

#include "getnext/core_db.hpp"

namespace httplib {
class Server;
}

namespace getnext {

struct RemoteConfig {
    /// e.g. "http://127.0.0.1:8080/query"
    std::string url;
    int k = 10;
    Schema schema;
    /// Sliding one-hour window; 0 disables the limit.
    std::int64_t queries_per_hour = 2000;
    std::chrono::milliseconds timeout{10000};

    /// {"url": ..., "k": ..., "queries_per_hour": ..., "timeout_ms": ...,
    ///  "schema": [{"name": ..., "domain": [...]}, ...]}
    static RemoteConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

nlohmann::json encode_request(const Schema& schema, const Query& q);
/// Inverse of encode_request; throws ValidationError on unknown attributes or labels.
Query decode_request(const Schema& schema, const nlohmann::json& body);

/// Answers one wire request against a local interface (which counts the query).
nlohmann::json answer_request(TopKSource& source, const nlohmann::json& body);

/// Client side: a TopKSource whose queries travel over the wire contract. Tuple ids are
/// assigned in order of first sight, keyed by value vector.
class RemoteTopKSource final : public TopKSource {
public:
    using Transport = std::function<std::string(const std::string& request_body)>;
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    /// Uses HTTP POST to config.url.
    explicit RemoteTopKSource(RemoteConfig config);
    /// Injectable transport and clock, for tests and alternative carriers.
    RemoteTopKSource(RemoteConfig config, Transport transport, Clock clock = std::chrono::steady_clock::now);

    const Schema& schema() const override { return config_.schema; }
    int k() const override { return config_.k; }
    /// Throws BudgetExceededError when the hourly budget is spent, before sending anything.
    QueryResult execute(const Query& q) override;
    std::int64_t query_count() const override { return count_; }

    /// Queries still allowed in the current window.
    std::int64_t remaining_budget();

private:
    TupleId intern(const std::vector<Value>& values);

    RemoteConfig config_;
    Transport transport_;
    Clock clock_;
    std::deque<std::chrono::steady_clock::time_point> window_;
    std::map<std::vector<Value>, TupleId> ids_;
    std::int64_t count_ = 0;
};

/// Serves `data` under the wire contract at POST /query, with GET /schema describing it.
class SimulatedEndpoint {
public:
    SimulatedEndpoint(std::shared_ptr<const RankedDataset> data, int k);
    ~SimulatedEndpoint();
    SimulatedEndpoint(const SimulatedEndpoint&) = delete;
    SimulatedEndpoint& operator=(const SimulatedEndpoint&) = delete;

    /// Binds to `port` (0 picks a free one) and serves on a background thread. Returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    std::int64_t queries_served() const;
    RemoteConfig client_config(const std::string& host, int port) const;

private:
    void install_routes();

    std::shared_ptr<const RankedDataset> data_;
    TopKInterface iface_;
    mutable std::mutex mutex_;
    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<std::thread> thread_;
};

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);

}  // namespace getnext
