#include "apisim/collection.hpp"

#include <algorithm>
#include <cstdio>

#include "apisim/parallel.hpp"
#include "apisim/prompts.hpp"

namespace apisim::collection {
namespace {

using backends::fnv1a64;

std::string hex8(std::uint64_t h) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(h & 0xffffffffull));
    return buf;
}

void log_to(const Logger& logger, const std::string& stage,
            const std::string& key, const std::string& message) {
    if (logger) {
        logger("stage=" + stage + " api=" + key + " " + message);
    }
}

std::vector<backends::ChatMessage> as_messages(const prompts::RenderedPrompt& p) {
    std::vector<backends::ChatMessage> messages;
    if (!p.system.empty()) {
        messages.push_back({backends::Role::System, p.system});
    }
    messages.push_back({backends::Role::User, p.user});
    return messages;
}

/// Strips whitespace and one optional markdown code fence around a JSON
/// payload the writer produced.
std::string strip_fence(std::string_view text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    auto end = text.find_last_not_of(" \t\r\n");
    if (begin == std::string_view::npos) {
        return "";
    }
    std::string body(text.substr(begin, end - begin + 1));
    if (body.rfind("```", 0) == 0) {
        const auto first_newline = body.find('\n');
        if (first_newline != std::string::npos) {
            body.erase(0, first_newline + 1);
        }
        const auto fence = body.rfind("```");
        if (fence != std::string::npos) {
            body.erase(fence);
        }
        const auto last = body.find_last_not_of(" \t\r\n");
        body.erase(last == std::string::npos ? 0 : last + 1);
    }
    return body;
}

/// Parses the writer's JSON call and forces routing fields from the doc so
/// writer drift cannot misroute records.
std::optional<ApiRequest> parse_written_call(std::string_view completion,
                                             const ApiDocument& doc) {
    json j;
    try {
        j = json::parse(strip_fence(completion));
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object()) {
        return std::nullopt;
    }
    ApiRequest request;
    try {
        request = request_from_json(j);
    } catch (const Error&) {
        return std::nullopt;
    }
    request.category = doc.category;
    request.tool_name = doc.tool_name;
    request.api_name = doc.api_name;
    try {
        canonical_key(request);  // validates tool_input is a JSON object
    } catch (const InvalidToolInput&) {
        return std::nullopt;
    }
    return request;
}

}  // namespace

HttpUpstream::HttpUpstream(std::string endpoint_url,
                           std::chrono::milliseconds timeout,
                           std::unique_ptr<backends::HttpTransport> transport)
    : endpoint_url_(std::move(endpoint_url)),
      timeout_(timeout),
      transport_(transport ? std::move(transport)
                           : backends::make_default_transport()) {}

ApiResponse HttpUpstream::execute(const ApiRequest& request) {
    const backends::HttpResult res =
        transport_->post(endpoint_url_,
                         {{"Content-Type", "application/json"}},
                         to_json(request).dump(), timeout_);
    if (res.status == 0) {
        throw UpstreamUnavailable("upstream transport failure: " + res.detail);
    }
    try {
        return envelope_from_upstream(res.body);
    } catch (const MalformedEnvelope&) {
        // Non-envelope bodies (e.g. proxy error pages) become classifiable
        // failure envelopes rather than hard errors.
        ApiResponse response;
        response.error = "HTTP error " + std::to_string(res.status);
        response.response = res.body;
        return response;
    }
}

ApiResponse MockUpstream::execute(const ApiRequest& request) {
    const std::string key = canonical_key(request);
    int attempt = 0;
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        attempt = ++attempts_[key];
    }
    if (fixed_response_.has_value()) {
        return *fixed_response_;
    }
    if (attempt <= behavior_.failures_before_success) {
        ApiResponse timeout;
        timeout.error = "";
        timeout.response = "Timeout error...HTTP connection to the upstream "
                           "timed out";
        return timeout;
    }
    const std::uint64_t h = fnv1a64(key);
    const int band = static_cast<int>(h % 10);
    if (band < behavior_.success_band) {
        ApiResponse ok;
        ok.error = "";
        ojson payload;
        payload["status"] = "ok";
        payload["api"] = request.api_name;
        payload["data"] = "record_" + hex8(h);
        payload["count"] = static_cast<int>(h % 50);
        ok.response = payload.dump();
        return ok;
    }
    if (band < behavior_.success_band + behavior_.parameter_band) {
        ApiResponse bad;
        bad.error = "Invalid request: required parameter missing or malformed "
                    "(parameter check failed)";
        bad.response = "";
        return bad;
    }
    ApiResponse other;
    other.error = "Service temporarily degraded; please retry in a moment.";
    other.response = "";
    return other;
}

void MockUpstream::set_fixed_response(ApiResponse response) {
    std::lock_guard lock(mutex_);
    fixed_response_ = std::move(response);
}

std::size_t MockUpstream::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::size_t MockUpstream::attempts_for(const ApiRequest& request) const {
    const std::string key = canonical_key(request);
    std::lock_guard lock(mutex_);
    const auto it = attempts_.find(key);
    return it == attempts_.end() ? 0 : static_cast<std::size_t>(it->second);
}

Collector::Collector(backends::ChatBackend& writer, Upstream& upstream,
                     TimeSource time, Logger logger)
    : writer_(writer),
      upstream_(upstream),
      time_(time ? std::move(time) : rfc3339_now),
      logger_(std::move(logger)) {}

bool Collector::probe_api(const ApiDocument& doc) {
    const auto prompt = prompts::call_writing(doc);
    backends::GenerationParams params;
    params.temperature = 0.0;
    std::optional<ApiRequest> request;
    for (int attempt = 0; attempt < 3 && !request.has_value(); ++attempt) {
        params.seed = attempt;
        request = parse_written_call(writer_.chat(as_messages(prompt), params), doc);
    }
    if (!request.has_value()) {
        log_to(logger_, "probe", doc.key(),
               "outcome=skipped reason=unparsable-writer-output");
        return false;
    }
    const ApiResponse response = upstream_.execute(*request);
    const CallOutcome outcome = classify_outcome(response.error, response.response);
    log_to(logger_, "probe", doc.key(),
           std::string("outcome=") + to_string(outcome));
    return outcome == CallOutcome::Success || outcome == CallOutcome::ParameterChange;
}

std::vector<Scenario> Collector::generate_scenarios(
    const ApiDocument& doc, int n, const backends::GenerationParams& params) {
    if (n < 1) {
        throw Error("generate_scenarios: n must be >= 1");
    }
    const auto prompt = prompts::scenario_generation(doc);
    const auto messages = as_messages(prompt);
    std::vector<Scenario> scenarios;
    scenarios.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        backends::GenerationParams per_call = params;
        per_call.seed = params.seed.value_or(0) + i;
        scenarios.push_back({doc.key(), writer_.chat(messages, per_call)});
    }
    return scenarios;
}

ApiRequest Collector::generate_request(const ApiDocument& doc,
                                       const Scenario& scenario,
                                       const backends::GenerationParams& params,
                                       int max_attempts) {
    const auto prompt = prompts::scenario_request(doc, scenario.text);
    const auto messages = as_messages(prompt);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        backends::GenerationParams per_call = params;
        // Bump the seed on re-asks so a deterministic writer can recover.
        per_call.seed = params.seed.value_or(0) + attempt * 1000003;
        const auto request =
            parse_written_call(writer_.chat(messages, per_call), doc);
        if (request.has_value()) {
            return *request;
        }
    }
    throw MalformedRequest("writer produced no parsable call for " + doc.key() +
                           " after " + std::to_string(max_attempts) + " attempts");
}

CollectResult Collector::collect_pairs(const ApiDocument& doc,
                                       const CollectionPlan& plan) {
    CollectResult result;
    backends::GenerationParams scenario_params;
    scenario_params.temperature = plan.scenario_temperature;
    scenario_params.seed = plan.seed;
    const int scenario_count = plan.scenarios_per_api.value_or(plan.calls_per_api);
    const std::vector<Scenario> scenarios =
        generate_scenarios(doc, scenario_count, scenario_params);

    for (int i = 0; i < plan.calls_per_api; ++i) {
        const Scenario& scenario = scenarios[static_cast<std::size_t>(i) %
                                             scenarios.size()];
        ApiRequest request;
        try {
            backends::GenerationParams request_params;
            request_params.temperature = plan.request_temperature;
            request_params.seed = plan.seed + i;
            request = generate_request(doc, scenario, request_params,
                                       plan.max_attempts_per_call);
        } catch (const MalformedRequest& e) {
            log_to(logger_, "collect", doc.key(),
                   std::string("outcome=skipped reason=") + e.what());
            continue;
        }
        ApiResponse response;
        try {
            for (int attempt = 0; attempt < plan.max_attempts_per_call; ++attempt) {
                response = upstream_.execute(request);
                if (classify_outcome(response.error, response.response) !=
                    CallOutcome::NotConnected) {
                    break;
                }
            }
        } catch (const UpstreamUnavailable& e) {
            result.aborted = true;
            result.abort_reason = e.what();
            log_to(logger_, "collect", doc.key(),
                   std::string("outcome=aborted reason=") + e.what());
            break;
        }
        result.records.push_back(make_pair_record(doc, std::move(request),
                                                  std::move(response),
                                                  Provenance::Real,
                                                  scenario.text, time_()));
    }
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const PairRecord& a, const PairRecord& b) {
                         return canonical_key(a.request) < canonical_key(b.request);
                     });
    return result;
}

std::vector<PairRecord> Collector::collect_catalog(
    const std::vector<ApiDocument>& docs, const CollectionPlan& plan,
    int max_workers) {
    std::vector<CollectResult> per_api(docs.size());
    parallel_for(docs.size(), max_workers, [&](std::size_t i) {
        if (!probe_api(docs[i])) {
            return;
        }
        per_api[i] = collect_pairs(docs[i], plan);
    });
    std::vector<PairRecord> all;
    for (auto& result : per_api) {
        std::move(result.records.begin(), result.records.end(),
                  std::back_inserter(all));
    }
    return all;
}

}  // namespace apisim::collection
