#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

#include "apisim/backends.hpp"
#include "apisim/core.hpp"
#include "apisim/jsonl.hpp"
#include "apisim/prompts.hpp"

namespace apisim {

/// The replay store refuses to start on an unreadable file rather than
/// silently rebuilding it.
struct StoreCorrupt : Error {
    using Error::Error;
};

struct GatewayConfig {
    std::string listen_address = "127.0.0.1:8811";
    SimulationMode default_mode = SimulationMode::Sft;
    std::size_t max_observation_tokens = 2048;
    std::optional<std::filesystem::path> record_path;
    std::filesystem::path cache_path;  // empty => memory-only store
    std::filesystem::path doc_catalog_path;
};

struct CacheEntry {
    std::string key;
    ApiResponse response;
    std::string stored_at;  // RFC 3339
};

ojson to_json(const CacheEntry& entry);
CacheEntry cache_entry_from_json(const json& j);

/// Durable key -> envelope store: append-only JSONL on disk, last-writer-wins
/// per key, compacted (sorted by key, one line each) on startup. A default-
/// constructed store is memory-only. Thread-safe.
class CacheStore {
public:
    CacheStore() = default;
    /// Loads and compacts the file at `path` (created on first put when
    /// absent). Throws StoreCorrupt on any unreadable or malformed line.
    explicit CacheStore(std::filesystem::path path);

    std::optional<ApiResponse> get(const std::string& key) const;
    void put(const CacheEntry& entry);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::unordered_map<std::string, CacheEntry> entries_;
};

/// Serves response envelopes for API requests: cache first, simulator
/// backend on miss, with per-key single-flight, observation truncation
/// before caching/recording, and optional pair recording.
///
/// Cache keys are canonical_key(request) for SFT-mode entries; CoT-mode
/// entries append a "\x1f cot" suffix so each stored envelope replays
/// unchanged and mode purity (mechanism present iff CoT) holds per key.
class Gateway {
public:
    Gateway(GatewayConfig config, const DocCatalog& catalog,
            backends::ChatBackend& simulator, TimeSource time = {}, Logger logger = {});

    /// Resolves the request against the catalog and returns an envelope.
    /// Unknown APIs yield {error: "API not found in catalog"}; an unusable
    /// backend (unavailable, refused, or 3x malformed output) yields
    /// {error: "simulator backend unavailable"}. Neither is ever cached.
    ApiResponse handle_simulate(const ApiRequest& request,
                                std::optional<SimulationMode> mode = {});

    /// The exact prompt pair a simulate call sends for this doc/request.
    prompts::RenderedPrompt build_prompt(const ApiDocument& doc,
                                         const ApiRequest& request,
                                         SimulationMode mode) const;

    /// {"catalog_size", "cache_entries", "backend_ok", "default_mode"}.
    ojson health() const;

    CacheStore& cache() { return cache_; }
    const GatewayConfig& config() const { return config_; }

    static std::string cache_key(const ApiRequest& request,
                                 SimulationMode mode);

private:
    ApiResponse simulate_miss(const ApiDocument& doc, const ApiRequest& request,
                              SimulationMode mode, const std::string& key);
    void record_pair(const ApiDocument& doc, const ApiRequest& request,
                     const ApiResponse& response);
    void log(const std::string& line) const;

    GatewayConfig config_;
    const DocCatalog& catalog_;
    backends::ChatBackend& simulator_;
    CacheStore cache_;
    TimeSource time_;
    Logger logger_;

    std::mutex flight_mutex_;
    std::condition_variable flight_cv_;
    std::set<std::string> in_flight_;
    std::mutex record_mutex_;
};

/// HTTP front end: POST /simulate takes the request sub-schema plus an
/// optional "mode" and returns the envelope JSON; GET /health returns the
/// status report.
class GatewayServer {
public:
    explicit GatewayServer(Gateway& gateway);
    ~GatewayServer();

    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns false when the address cannot be bound.
    bool start(const std::string& host, int port);
    /// Blocking variant for the CLI; returns when the server stops.
    bool run(const std::string& host, int port);
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; throws Error when the port is missing or non-numeric.
std::pair<std::string, int> split_listen_address(const std::string& address);

}  // namespace apisim
