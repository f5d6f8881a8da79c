#include "apisim/gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>
#include <vector>

#include "httplib.h"

namespace apisim {

ojson to_json(const CacheEntry& entry) {
    ojson j;
    j["key"] = entry.key;
    j["response"] = to_json(entry.response);
    j["stored_at"] = entry.stored_at;
    return j;
}

CacheEntry cache_entry_from_json(const json& j) {
    try {
        CacheEntry entry;
        entry.key = j.at("key").get<std::string>();
        entry.response = response_from_json(j.at("response"));
        entry.stored_at = j.at("stored_at").get<std::string>();
        return entry;
    } catch (const json::exception& e) {
        throw StoreCorrupt(std::string("cache entry malformed: ") + e.what());
    } catch (const MalformedEnvelope& e) {
        throw StoreCorrupt(std::string("cache entry malformed: ") + e.what());
    }
}

CacheStore::CacheStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) {
        return;
    }
    std::ifstream in(path_);
    if (!in) {
        throw StoreCorrupt("cache store unreadable: " + path_.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw StoreCorrupt("cache store " + path_.string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
        }
        CacheEntry entry;
        try {
            entry = cache_entry_from_json(row);
        } catch (const StoreCorrupt& e) {
            throw StoreCorrupt("cache store " + path_.string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
        }
        entries_[entry.key] = std::move(entry);  // last writer wins
    }
    in.close();

    // Compact: one line per surviving key, sorted for determinism.
    std::vector<const CacheEntry*> survivors;
    survivors.reserve(entries_.size());
    for (const auto& [key, entry] : entries_) {
        (void)key;
        survivors.push_back(&entry);
    }
    std::sort(survivors.begin(), survivors.end(),
              [](const CacheEntry* a, const CacheEntry* b) {
                  return a->key < b->key;
              });
    std::vector<ojson> rows;
    rows.reserve(survivors.size());
    for (const CacheEntry* entry : survivors) {
        rows.push_back(to_json(*entry));
    }
    write_jsonl(path_, rows);
}

std::optional<ApiResponse> CacheStore::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second.response;
}

void CacheStore::put(const CacheEntry& entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[entry.key] = entry;
    if (!path_.empty()) {
        append_jsonl(path_, to_json(entry));
    }
}

std::size_t CacheStore::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

namespace {

constexpr const char* kUnknownApiError = "API not found in catalog";
constexpr const char* kUnavailableError = "simulator backend unavailable";

}  // namespace

Gateway::Gateway(GatewayConfig config, const DocCatalog& catalog,
                 backends::ChatBackend& simulator, TimeSource time, Logger logger)
    : config_(std::move(config)),
      catalog_(catalog),
      simulator_(simulator),
      cache_(config_.cache_path),
      time_(std::move(time)),
      logger_(std::move(logger)) {
    if (config_.max_observation_tokens < 1) {
        throw Error("max_observation_tokens must be at least 1");
    }
}

std::string Gateway::cache_key(const ApiRequest& request,
                               SimulationMode mode) {
    std::string key = canonical_key(request);
    if (mode == SimulationMode::Cot) {
        key += "\x1f";
        key += "cot";
    }
    return key;
}

prompts::RenderedPrompt Gateway::build_prompt(const ApiDocument& doc,
                                              const ApiRequest& request,
                                              SimulationMode mode) const {
    return prompts::simulation(doc, request, mode);
}

ApiResponse Gateway::handle_simulate(const ApiRequest& request,
                                     std::optional<SimulationMode> mode) {
    const SimulationMode effective = mode.value_or(config_.default_mode);
    const ApiDocument* doc = catalog_.find(request);
    if (doc == nullptr) {
        log("stage=simulate api=" + request.tool_name + "/" +
            request.api_name + " outcome=unknown_api");
        return ApiResponse{kUnknownApiError, "", std::nullopt};
    }

    const std::string key = cache_key(request, effective);
    if (auto hit = cache_.get(key)) {
        return *hit;
    }

    // Single-flight per key: one concurrent miss reaches the backend; the
    // rest wait and then serve the freshly cached envelope.
    {
        std::unique_lock<std::mutex> lock(flight_mutex_);
        flight_cv_.wait(lock, [&] { return in_flight_.count(key) == 0; });
        if (auto hit = cache_.get(key)) {
            return *hit;
        }
        in_flight_.insert(key);
    }
    ApiResponse response;
    try {
        response = simulate_miss(*doc, request, effective, key);
    } catch (...) {
        std::lock_guard<std::mutex> lock(flight_mutex_);
        in_flight_.erase(key);
        flight_cv_.notify_all();
        throw;
    }
    {
        std::lock_guard<std::mutex> lock(flight_mutex_);
        in_flight_.erase(key);
        flight_cv_.notify_all();
    }
    return response;
}

ApiResponse Gateway::simulate_miss(const ApiDocument& doc,
                                   const ApiRequest& request,
                                   SimulationMode mode,
                                   const std::string& key) {
    const prompts::RenderedPrompt prompt = build_prompt(doc, request, mode);
    const std::vector<backends::ChatMessage> messages = {
        {backends::Role::System, prompt.system}, {backends::Role::User, prompt.user}};
    const std::uint64_t seed_base = backends::fnv1a64(key);

    ApiResponse response;
    bool parsed = false;
    for (int attempt = 1; attempt <= 3 && !parsed; ++attempt) {
        backends::GenerationParams params;
        params.temperature = 0.0;
        params.seed = static_cast<std::int64_t>(
            (seed_base + static_cast<std::uint64_t>(attempt) * 1000003ull) &
            0x7fffffffffffffffull);
        std::string reply;
        try {
            reply = simulator_.chat(messages, params);
        } catch (const backends::BackendUnavailable&) {
            log("stage=simulate api=" + request.tool_name + "/" +
                request.api_name + " outcome=backend_unavailable");
            return ApiResponse{kUnavailableError, "", std::nullopt};
        } catch (const backends::BackendRefused&) {
            log("stage=simulate api=" + request.tool_name + "/" +
                request.api_name + " outcome=backend_refused");
            return ApiResponse{kUnavailableError, "", std::nullopt};
        }
        try {
            response = parse_envelope(reply);
            if (mode == SimulationMode::Cot &&
                !response.mechanism.has_value()) {
                throw MalformedEnvelope("CoT reply lacks the mechanism field");
            }
            if (mode == SimulationMode::Sft && response.mechanism.has_value()) {
                throw MalformedEnvelope("SFT reply carries a mechanism field");
            }
            parsed = true;
        } catch (const MalformedEnvelope& e) {
            log("stage=simulate api=" + request.tool_name + "/" +
                request.api_name + " attempt=" + std::to_string(attempt) +
                " outcome=malformed detail=" + e.what());
        }
    }
    if (!parsed) {
        return ApiResponse{kUnavailableError, "", std::nullopt};
    }

    response.response =
        truncate_observation(response.response, config_.max_observation_tokens);
    cache_.put({key, response, time_ ? time_() : rfc3339_now()});
    if (config_.record_path.has_value()) {
        record_pair(doc, request, response);
    }
    return response;
}

void Gateway::record_pair(const ApiDocument& doc, const ApiRequest& request,
                          const ApiResponse& response) {
    ApiResponse stored = response;
    stored.mechanism.reset();
    PairRecord record =
        make_pair_record(doc, request, std::move(stored), Provenance::Synthetic,
                         std::nullopt, time_ ? time_() : rfc3339_now());
    std::lock_guard<std::mutex> lock(record_mutex_);
    append_jsonl(*config_.record_path, to_json(record));
}

ojson Gateway::health() const {
    ojson j;
    j["catalog_size"] = catalog_.size();
    j["cache_entries"] = cache_.size();
    j["backend_ok"] = simulator_.healthy();
    j["default_mode"] = to_string(config_.default_mode);
    return j;
}

void Gateway::log(const std::string& line) const {
    if (logger_) {
        logger_(line);
    }
}

std::pair<std::string, int> split_listen_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 >= address.size()) {
        throw Error("listen address must be host:port, got \"" + address +
                    "\"");
    }
    const std::string host = address.substr(0, colon);
    const std::string port_text = address.substr(colon + 1);
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(port_text, &used);
        if (used != port_text.size()) {
            throw std::invalid_argument(port_text);
        }
    } catch (const std::exception&) {
        throw Error("listen address port is not a number: \"" + port_text +
                    "\"");
    }
    if (port < 0 || port > 65535) {
        throw Error("listen address port out of range: " + port_text);
    }
    return {host.empty() ? std::string("127.0.0.1") : host, port};
}

struct GatewayServer::Impl {
    explicit Impl(Gateway& gw) : gateway(gw) { wire(); }

    void wire() {
        server.Post("/simulate", [this](const httplib::Request& req,
                                        httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception& e) {
                res.status = 400;
                res.set_content(
                    ojson{{"error", std::string("malformed request body: ") +
                                        e.what()}}
                        .dump(),
                    "application/json");
                return;
            }
            ApiRequest request;
            std::optional<SimulationMode> mode;
            try {
                request = request_from_json(body);
                if (body.is_object() && body.contains("mode")) {
                    mode = mode_from_string(body.at("mode").get<std::string>());
                }
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(ojson{{"error", e.what()}}.dump(),
                                "application/json");
                return;
            }
            const ApiResponse envelope =
                gateway.handle_simulate(request, mode);
            res.set_content(serialize_envelope(envelope), "application/json");
        });
        server.Get("/health", [this](const httplib::Request&,
                                     httplib::Response& res) {
            res.set_content(gateway.health().dump(), "application/json");
        });
    }

    Gateway& gateway;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;
};

GatewayServer::GatewayServer(Gateway& gateway)
    : impl_(std::make_unique<Impl>(gateway)) {}

GatewayServer::~GatewayServer() { stop(); }

bool GatewayServer::start(const std::string& host, int port) {
    if (port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port(host);
        if (impl_->bound_port <= 0) {
            return false;
        }
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            return false;
        }
        impl_->bound_port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

bool GatewayServer::run(const std::string& host, int port) {
    impl_->bound_port = port;
    return impl_->server.listen(host, port);
}

void GatewayServer::stop() {
    if (impl_ == nullptr) {
        return;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

int GatewayServer::port() const { return impl_->bound_port; }

}  // namespace apisim
