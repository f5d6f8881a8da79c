#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "apisim/backends.hpp"
#include "apisim/collection.hpp"
#include "apisim/core.hpp"
#include "doctest.h"

using namespace apisim;
using namespace apisim::collection;

namespace {

ApiDocument weather_doc() {
    ApiDocument doc;
    doc.category = "Weather";
    doc.tool_name = "open_weather";
    doc.tool_description = "weather data";
    doc.api_name = "current_conditions";
    doc.api_description = "latest observation";
    doc.required_parameters = {
        {"location", "STRING", "city to observe", std::nullopt}};
    doc.validate();
    return doc;
}

ApiDocument no_param_doc() {
    ApiDocument doc;
    doc.category = "Time";
    doc.tool_name = "world_clock";
    doc.tool_description = "clock data";
    doc.api_name = "utc_now";
    doc.api_description = "current UTC timestamp";
    doc.validate();
    return doc;
}

ApiResponse fixed(const std::string& error, const std::string& response) {
    ApiResponse r;
    r.error = error;
    r.response = response;
    return r;
}

TimeSource fixed_time() {
    return [] { return std::string{"2026-01-01T00:00:00Z"}; };
}

// Throws at the transport level, the only condition that aborts collection.
class ThrowingUpstream : public Upstream {
public:
    ApiResponse execute(const ApiRequest&) override {
        throw UpstreamUnavailable("socket closed");
    }
};

// Routes one API to a canned failure, everything else to the mock bands.
class PartialOutageUpstream : public Upstream {
public:
    explicit PartialOutageUpstream(std::string down_api)
        : down_api_(std::move(down_api)) {}

    ApiResponse execute(const ApiRequest& request) override {
        if (request.api_name == down_api_) {
            return fixed("HTTP 503", "");
        }
        return inner_.execute(request);
    }

private:
    std::string down_api_;
    MockUpstream inner_;
};

}  // namespace

TEST_CASE("probe treats Success and ParameterChange as reachable") {
    backends::MockChatBackend writer;
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    const ApiDocument doc = weather_doc();

    upstream.set_fixed_response(fixed("", "{\"ok\":true}"));
    CHECK(collector.probe_api(doc));

    upstream.set_fixed_response(fixed("missing required parameter", ""));
    CHECK(collector.probe_api(doc));

    upstream.set_fixed_response(fixed("HTTP 500", ""));
    CHECK_FALSE(collector.probe_api(doc));

    upstream.set_fixed_response(fixed("endpoint not found", ""));
    CHECK_FALSE(collector.probe_api(doc));
}

TEST_CASE("probe reports unparsable writer output as unavailable") {
    backends::ScriptedChatBackend writer(
        {"sorry, no call", "still prose", "and again"});
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    std::vector<std::string> log;
    Collector logged(writer, upstream, fixed_time(),
                     [&](std::string_view line) { log.emplace_back(line); });
    CHECK_FALSE(collector.probe_api(weather_doc()));
    CHECK(upstream.calls() == 0);
}

TEST_CASE("scenario generation yields n distinct scenarios") {
    backends::MockChatBackend writer;
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    backends::GenerationParams params;
    params.temperature = 1.0;
    params.seed = 9;
    const auto scenarios =
        collector.generate_scenarios(weather_doc(), 5, params);
    REQUIRE(scenarios.size() == 5);
    std::set<std::string> distinct;
    for (const auto& s : scenarios) {
        CHECK(s.doc_key == weather_doc().key());
        CHECK_FALSE(s.text.empty());
        distinct.insert(s.text);
    }
    CHECK(distinct.size() == 5);
    CHECK_THROWS_AS(collector.generate_scenarios(weather_doc(), 0, params),
                    Error);
}

TEST_CASE("request generation retries prose and forces doc routing") {
    backends::ScriptedChatBackend writer({
        "I think the call should be...",
        "```json\n{\"tool_name\":\"impostor\",\"api_name\":\"other\","
        "\"tool_input\":\"{\\\"location\\\":\\\"Oslo\\\"}\"}\n```",
    });
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    backends::GenerationParams params;
    const ApiRequest request = collector.generate_request(
        weather_doc(), {weather_doc().key(), "check the weather"}, params, 3);
    // Claimed routing is overridden by the doc being collected.
    CHECK(request.tool_name == "open_weather");
    CHECK(request.api_name == "current_conditions");
    CHECK(request.category == "Weather");
    CHECK(request.tool_input.find("Oslo") != std::string::npos);
    CHECK(writer.calls() == 2);
}

TEST_CASE("request generation throws MalformedRequest after max attempts") {
    backends::ScriptedChatBackend writer({"prose", "prose", "prose", "prose"});
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    backends::GenerationParams params;
    CHECK_THROWS_AS(collector.generate_request(
                        weather_doc(), {weather_doc().key(), "scenario"},
                        params, 3),
                    MalformedRequest);
    CHECK(writer.calls() == 3);
}

TEST_CASE("a no-parameter API writes the empty tool_input object") {
    backends::MockChatBackend writer;
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    backends::GenerationParams params;
    const ApiRequest request = collector.generate_request(
        no_param_doc(), {no_param_doc().key(), "what time is it"}, params, 3);
    const json input = json::parse(request.tool_input);
    CHECK(input.is_object());
    // The mock writer may tag a variant key; required params stay absent.
    CHECK_FALSE(input.contains("location"));
}

TEST_CASE("collect_pairs happy path: sorted, stamped, classified records") {
    backends::MockChatBackend writer;
    MockUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    CollectionPlan plan;
    plan.calls_per_api = 12;
    plan.seed = 5;
    const CollectResult result = collector.collect_pairs(weather_doc(), plan);
    CHECK_FALSE(result.aborted);
    REQUIRE(result.records.size() == 12);
    std::vector<std::string> keys;
    for (const auto& record : result.records) {
        CHECK(record.doc_key == weather_doc().key());
        CHECK(record.provenance == Provenance::Real);
        CHECK(record.scenario.has_value());
        CHECK(record.collected_at == "2026-01-01T00:00:00Z");
        CHECK(record.outcome == classify_outcome(record.response.error,
                                                 record.response.response));
        keys.push_back(canonical_key(record.request));
    }
    CHECK(std::is_sorted(keys.begin(), keys.end()));

    // Same plan, fresh collector over a fresh upstream: identical output.
    backends::MockChatBackend writer2;
    MockUpstream upstream2;
    Collector collector2(writer2, upstream2, fixed_time());
    const CollectResult again = collector2.collect_pairs(weather_doc(), plan);
    REQUIRE(again.records.size() == result.records.size());
    for (std::size_t i = 0; i < again.records.size(); ++i) {
        CHECK(to_json(again.records[i]).dump() ==
              to_json(result.records[i]).dump());
    }
}

TEST_CASE("transient first-call timeouts are retried away") {
    backends::MockChatBackend writer;
    MockUpstream::Behavior flaky;
    flaky.failures_before_success = 1;
    CollectionPlan plan;
    plan.calls_per_api = 8;
    plan.max_attempts_per_call = 3;

    MockUpstream retried(flaky);
    Collector with_retries(writer, retried, fixed_time());
    const CollectResult good = with_retries.collect_pairs(weather_doc(), plan);
    REQUIRE(good.records.size() == 8);
    for (const auto& record : good.records) {
        CHECK(record.outcome != CallOutcome::NotConnected);
    }

    // Without retries the per-key timeout lands in the record.
    MockUpstream raw(flaky);
    backends::MockChatBackend writer2;
    Collector without_retries(writer2, raw, fixed_time());
    plan.max_attempts_per_call = 1;
    const CollectResult bad = without_retries.collect_pairs(weather_doc(), plan);
    REQUIRE(bad.records.size() == 8);
    for (const auto& record : bad.records) {
        CHECK(record.outcome == CallOutcome::NotConnected);
    }
}

TEST_CASE("transport-level failure aborts collection with a reason") {
    backends::MockChatBackend writer;
    ThrowingUpstream upstream;
    Collector collector(writer, upstream, fixed_time());
    CollectionPlan plan;
    plan.calls_per_api = 4;
    const CollectResult result = collector.collect_pairs(weather_doc(), plan);
    CHECK(result.aborted);
    CHECK(result.abort_reason.find("socket closed") != std::string::npos);
    CHECK(result.records.empty());
}

TEST_CASE("collect_catalog probes first and keeps catalog order") {
    backends::MockChatBackend writer;
    PartialOutageUpstream upstream("current_conditions");
    Collector collector(writer, upstream, fixed_time());
    CollectionPlan plan;
    plan.calls_per_api = 6;
    const std::vector<ApiDocument> docs = {weather_doc(), no_param_doc()};
    const auto records = collector.collect_catalog(docs, plan, 2);
    // The weather API fails its probe (HTTP 503) and contributes nothing.
    REQUIRE(records.size() == 6);
    for (const auto& record : records) {
        CHECK(record.doc_key == no_param_doc().key());
    }

    // With both healthy, records arrive grouped in catalog order.
    backends::MockChatBackend writer2;
    MockUpstream healthy;
    Collector collector2(writer2, healthy, fixed_time());
    const auto all = collector2.collect_catalog(docs, plan, 2);
    REQUIRE(all.size() == 12);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(all[i].doc_key == weather_doc().key());
        CHECK(all[i + 6].doc_key == no_param_doc().key());
    }
}
