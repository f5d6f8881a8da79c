#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "apisim/backends.hpp"
#include "apisim/core.hpp"

namespace apisim::collection {

// The upstream executing real calls stopped answering at the transport
// level; the affected API keeps its partial results and is flagged.
struct UpstreamUnavailable : Error {
    using Error::Error;
};

// The writer backend kept producing unparsable calls.
struct MalformedRequest : Error {
    using Error::Error;
};

struct Scenario {
    std::string doc_key;
    std::string text;
};

struct CollectionPlan {
    int calls_per_api = 200;
    int max_attempts_per_call = 3;
    double scenario_temperature = 1.0;
    double request_temperature = 0.1;
    // Scenarios generated per API; one per request when unset.
    std::optional<int> scenarios_per_api;
    std::int64_t seed = 0;
};

/// Executes an ApiRequest against a live or simulated tool marketplace.
class Upstream {
public:
    virtual ~Upstream() = default;

    /// Returns the response envelope. Throws UpstreamUnavailable only on
    /// transport-level failure; HTTP-level errors come back as envelopes so
    /// they flow through outcome classification.
    virtual ApiResponse execute(const ApiRequest& request) = 0;
};

/// Passthrough client POSTing the request JSON to a marketplace endpoint.
class HttpUpstream : public Upstream {
public:
    explicit HttpUpstream(std::string endpoint_url,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds{30000},
                          std::unique_ptr<backends::HttpTransport> transport = nullptr);

    ApiResponse execute(const ApiRequest& request) override;

private:
    std::string endpoint_url_;
    std::chrono::milliseconds timeout_;
    std::unique_ptr<backends::HttpTransport> transport_;
};

/// Deterministic upstream for tests and the desk demo. Each request key maps
/// to a fixed outcome band (success / parameter failure / other failure),
/// optionally preceded by transient timeout responses.
class MockUpstream : public Upstream {
public:
    struct Behavior {
        // Timeout envelopes returned for a key before its real outcome.
        int failures_before_success = 0;
        // Out of every 10 hash buckets: buckets < success_band succeed,
        // the next parameter_band buckets fail on parameters, the rest fail
        // with an unrelated error.
        int success_band = 7;
        int parameter_band = 2;
    };

    MockUpstream() = default;
    explicit MockUpstream(Behavior behavior) : behavior_(behavior) {}

    ApiResponse execute(const ApiRequest& request) override;

    /// Forces every call to return exactly this envelope.
    void set_fixed_response(ApiResponse response);

    std::size_t calls() const;
    /// How many times a request with this key has been executed.
    std::size_t attempts_for(const ApiRequest& request) const;

private:
    Behavior behavior_;
    std::optional<ApiResponse> fixed_response_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, int> attempts_;
    std::size_t calls_ = 0;
};

struct CollectResult {
    std::vector<PairRecord> records;
    bool aborted = false;
    std::string abort_reason;
};

/// Drives probe → scenarios → requests → execution for a doc catalog.
class Collector {
public:
    Collector(backends::ChatBackend& writer, Upstream& upstream,
              TimeSource time = {}, Logger logger = {});

    /// Writes one reachability-test call, executes it, and reports whether
    /// the API answered with Success or ParameterChange. Malformed writer
    /// output after 3 attempts counts as unavailable.
    bool probe_api(const ApiDocument& doc);

    /// n scenarios grounded in the doc. Seeds params.seed.value_or(0)+i per
    /// scenario so a deterministic writer still yields distinct texts.
    std::vector<Scenario> generate_scenarios(const ApiDocument& doc, int n,
                                             const backends::GenerationParams& params);

    /// One call addressing the scenario, parsed from the writer's JSON with
    /// routing fields forced from the doc. Re-asks on unparsable output up
    /// to max_attempts; throws MalformedRequest after that.
    ApiRequest generate_request(const ApiDocument& doc, const Scenario& scenario,
                                const backends::GenerationParams& params,
                                int max_attempts = 3);

    /// Up to plan.calls_per_api records for one API, each call retried on
    /// NotConnected up to plan.max_attempts_per_call. Output is sorted by
    /// canonical key (call order breaks ties).
    CollectResult collect_pairs(const ApiDocument& doc, const CollectionPlan& plan);

    /// Full catalog run: probe, then per-API collection over a bounded
    /// worker pool; results concatenated in catalog order.
    std::vector<PairRecord> collect_catalog(const std::vector<ApiDocument>& docs,
                                            const CollectionPlan& plan,
                                            int max_workers = 4);

private:
    backends::ChatBackend& writer_;
    Upstream& upstream_;
    TimeSource time_;
    Logger logger_;
};

}  // namespace apisim::collection
