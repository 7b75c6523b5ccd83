#include "getnext/remote.hpp"

#include <regex>
#include <thread>

#include "httplib.h"

namespace getnext {

nlohmann::json schema_to_json(const Schema& schema) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& a : schema.attributes()) {
        out.push_back({{"name", a.name}, {"domain", a.domain}});
    }
    return out;
}

Schema schema_from_json(const nlohmann::json& j) {
    std::vector<Attribute> attrs;
    try {
        for (const auto& a : j) {
            attrs.push_back({a.at("name").get<std::string>(), a.at("domain").get<std::vector<std::string>>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed schema: ") + e.what());
    }
    return Schema(std::move(attrs));
}

RemoteConfig RemoteConfig::from_json(const nlohmann::json& j) {
    RemoteConfig c;
    try {
        c.url = j.at("url").get<std::string>();
        c.k = j.value("k", c.k);
        c.queries_per_hour = j.value("queries_per_hour", c.queries_per_hour);
        c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(c.timeout.count())));
        c.schema = schema_from_json(j.at("schema"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed remote config: ") + e.what());
    }
    if (c.k < 2) throw ValidationError("remote k must be at least 2");
    if (c.queries_per_hour < 0) throw ValidationError("queries_per_hour must be non-negative");
    return c;
}

nlohmann::json RemoteConfig::to_json() const {
    return {{"url", url},
            {"k", k},
            {"queries_per_hour", queries_per_hour},
            {"timeout_ms", timeout.count()},
            {"schema", schema_to_json(schema)}};
}

nlohmann::json encode_request(const Schema& schema, const Query& q) {
    nlohmann::json preds = nlohmann::json::object();
    for (auto a : q.attributes()) {
        preds[schema.attribute(a).name] = schema.label(a, q.at(a));
    }
    return {{"predicates", preds}};
}

Query decode_request(const Schema& schema, const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("predicates") || !body.at("predicates").is_object()) {
        throw ValidationError("request must be an object with a 'predicates' object");
    }
    std::vector<std::pair<std::string, std::string>> preds;
    for (const auto& [name, value] : body.at("predicates").items()) {
        if (!value.is_string()) throw ValidationError("predicate values must be strings");
        preds.emplace_back(name, value.get<std::string>());
    }
    try {
        return Query::from_labels(schema, preds);
    } catch (const SchemaError& e) {
        throw ValidationError(e.what());
    }
}

nlohmann::json answer_request(TopKSource& source, const nlohmann::json& body) {
    const auto q = decode_request(source.schema(), body);
    const auto r = source.execute(q);
    nlohmann::json tuples = nlohmann::json::array();
    for (const auto& t : r.tuples) {
        nlohmann::json row = nlohmann::json::array();
        for (AttrIndex a = 0; a < t.values.size(); ++a) row.push_back(source.schema().label(a, t.values[a]));
        tuples.push_back(std::move(row));
    }
    return {{"status", std::string(to_string(r.status))}, {"tuples", tuples}};
}

// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw ValidationError("remote url must look like http://host[:port]/path, got '" + url + "'");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

RemoteTopKSource::Transport http_transport(const RemoteConfig& config) {
    const auto parts = split_url(config.url);
    const auto timeout = config.timeout;
    return [parts, timeout](const std::string& body) {
        httplib::Client client(parts.scheme_host_port);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                      static_cast<long>((timeout.count() % 1000) * 1000));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                static_cast<long>((timeout.count() % 1000) * 1000));
        auto res = client.Post(parts.path, body, "application/json");
        if (!res) {
            throw Error("remote endpoint unreachable: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw Error("remote endpoint answered HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        return res->body;
    };
}

ResultStatus parse_status(const std::string& s) {
    if (s == "overflow") return ResultStatus::Overflow;
    if (s == "valid") return ResultStatus::Valid;
    if (s == "underflow") return ResultStatus::Underflow;
    throw ValidationError("unknown result status '" + s + "'");
}

}  // namespace

RemoteTopKSource::RemoteTopKSource(RemoteConfig config)
    : RemoteTopKSource(config, http_transport(config)) {}

RemoteTopKSource::RemoteTopKSource(RemoteConfig config, Transport transport, Clock clock)
    : config_(std::move(config)), transport_(std::move(transport)), clock_(std::move(clock)) {
    if (config_.k < 2) throw ValidationError("remote k must be at least 2");
    if (config_.schema.size() == 0) throw ValidationError("remote schema is empty");
}

std::int64_t RemoteTopKSource::remaining_budget() {
    if (config_.queries_per_hour == 0) {
        return std::numeric_limits<std::int64_t>::max();
    }
    const auto now = clock_();
    while (!window_.empty() && now - window_.front() >= std::chrono::hours(1)) window_.pop_front();
    return config_.queries_per_hour - static_cast<std::int64_t>(window_.size());
}

TupleId RemoteTopKSource::intern(const std::vector<Value>& values) {
    auto [it, inserted] = ids_.emplace(values, static_cast<TupleId>(ids_.size() + 1));
    return it->second;
}

QueryResult RemoteTopKSource::execute(const Query& q) {
    q.validate(config_.schema);
    if (remaining_budget() <= 0) {
        throw BudgetExceededError(count_, config_.queries_per_hour);
    }
    window_.push_back(clock_());
    ++count_;
    const auto raw = transport_(encode_request(config_.schema, q).dump());

    nlohmann::json body;
    try {
        body = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("remote response is not JSON: ") + e.what());
    }
    QueryResult r;
    try {
        r.status = parse_status(body.at("status").get<std::string>());
        for (const auto& row : body.at("tuples")) {
            if (!row.is_array() || row.size() != config_.schema.size()) {
                throw ValidationError("remote tuple has the wrong arity");
            }
            Tuple t;
            t.values.resize(row.size());
            for (AttrIndex a = 0; a < row.size(); ++a) {
                t.values[a] = config_.schema.value_of(a, row[a].get<std::string>());
            }
            if (!q.matches(t)) throw ValidationError("remote returned a tuple that does not match the query");
            t.id = intern(t.values);
            r.tuples.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed remote response: ") + e.what());
    } catch (const SchemaError& e) {
        throw ValidationError(std::string("remote response outside the schema: ") + e.what());
    }
    const auto n = r.tuples.size();
    const bool consistent = (r.status == ResultStatus::Underflow && n == 0) ||
                            (r.status == ResultStatus::Valid && n >= 1 && n <= static_cast<std::size_t>(config_.k)) ||
                            (r.status == ResultStatus::Overflow && n == static_cast<std::size_t>(config_.k));
    if (!consistent) {
        throw ValidationError("remote status '" + std::string(to_string(r.status)) + "' with " + std::to_string(n) +
                              " tuples contradicts k=" + std::to_string(config_.k));
    }
    return r;
}

// ---------------------------------------------------------------------------

SimulatedEndpoint::SimulatedEndpoint(std::shared_ptr<const RankedDataset> data, int k)
    : data_(data), iface_(std::move(data), k), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

SimulatedEndpoint::~SimulatedEndpoint() { stop(); }

void SimulatedEndpoint::install_routes() {
    server_->Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = nlohmann::json::parse(req.body);
            std::lock_guard lock(mutex_);
            res.set_content(answer_request(iface_, body).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    server_->Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(nlohmann::json{{"k", iface_.k()}, {"schema", schema_to_json(data_->schema())}}.dump(),
                        "application/json");
    });
}

int SimulatedEndpoint::start(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void SimulatedEndpoint::listen(const std::string& host, int port) {
    if (!server_->listen(host, port)) {
        throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }
}

void SimulatedEndpoint::stop() {
    if (server_) server_->stop();
    if (thread_ && thread_->joinable()) thread_->join();
    thread_.reset();
}

std::int64_t SimulatedEndpoint::queries_served() const {
    std::lock_guard lock(mutex_);
    return iface_.query_count();
}

RemoteConfig SimulatedEndpoint::client_config(const std::string& host, int port) const {
    RemoteConfig c;
    c.url = "http://" + host + ":" + std::to_string(port) + "/query";
    c.k = iface_.k();
    c.schema = data_->schema();
    c.queries_per_hour = 0;
    return c;
}

}  // namespace getnext
