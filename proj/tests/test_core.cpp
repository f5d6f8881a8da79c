#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apisim/core.hpp"
#include "apisim/jsonl.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace apisim;

namespace {

struct OutcomeCase {
    const char* error;
    const char* response;
    CallOutcome want;
};

// One fixture per classification keyword plus precedence and boundary cases.
const std::vector<OutcomeCase> kOutcomeCases = {
    // ParsingError: prefix match on the error field, case-insensitive.
    {"Function executing from weather_api fails: invalid syntax", "",
     CallOutcome::ParsingError},
    {"FUNCTION EXECUTING FROM tool: bad call", "", CallOutcome::ParsingError},
    // The prefix only counts in the error field.
    {"", "Function executing from tool", CallOutcome::Success},
    // NotConnected: "HTTP" in the error...
    {"HTTP 500 from upstream", "", CallOutcome::NotConnected},
    {"http", "", CallOutcome::NotConnected},
    // ...or connectivity phrases in the response.
    {"", "HTTP error: bad gateway", CallOutcome::NotConnected},
    {"", "could not open a connection to the host", CallOutcome::NotConnected},
    {"", "rate limit exceeded, retry later", CallOutcome::NotConnected},
    {"", "the request hit a TIMEOUT after 30s", CallOutcome::NotConnected},
    // NotFound keywords on either side.
    {"endpoint not found", "", CallOutcome::NotFound},
    {"", "this API is Not Available in your region", CallOutcome::NotFound},
    {"API doesn't exists", "", CallOutcome::NotFound},
    {"", "Service Not Found", CallOutcome::NotFound},
    {"internal error while routing the call", "", CallOutcome::NotFound},
    {"status 404", "", CallOutcome::NotFound},
    {"", "got 404 from the upstream proxy", CallOutcome::NotFound},
    // NotAuthorised keywords.
    {"please authorize the application first", "", CallOutcome::NotAuthorised},
    {"Unauthorized", "", CallOutcome::NotAuthorised},
    {"", "your account carries a blocked user flag", CallOutcome::NotAuthorised},
    {"", "please unsubscribe and subscribe again", CallOutcome::NotAuthorised},
    {"invalid credential provided", "", CallOutcome::NotAuthorised},
    {"", "this endpoint is Disabled For Your Subscription",
     CallOutcome::NotAuthorised},
    {"401", "", CallOutcome::NotAuthorised},
    {"", "the server said 403", CallOutcome::NotAuthorised},
    // Status codes match standalone digit runs only.
    {"error 1404", "", CallOutcome::OtherError},
    {"4040 things happened", "", CallOutcome::OtherError},
    {"x401y", "", CallOutcome::NotAuthorised},
    {"14013", "", CallOutcome::OtherError},
    // ParameterChange keywords.
    {"missing required parameter location", "", CallOutcome::ParameterChange},
    {"", "failed to parse tool_input", CallOutcome::ParameterChange},
    {"parsing the payload failed", "", CallOutcome::ParameterChange},
    {"", "undefined variable date", CallOutcome::ParameterChange},
    // Fallbacks.
    {"something exploded", "", CallOutcome::OtherError},
    {"", "all good", CallOutcome::Success},
    {"", "", CallOutcome::Success},
    // Precedence: earlier categories win.
    {"Function executing from y", "rate limit", CallOutcome::ParsingError},
    {"HTTP", "not found", CallOutcome::NotConnected},
    {"parameter missing", "404", CallOutcome::NotFound},
    {"unauthorized parameter", "", CallOutcome::NotAuthorised},
    {"", "connection lost while parsing", CallOutcome::NotConnected},
};

std::string random_ascii(std::mt19937_64& rng, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len_dist(0, max_len);
    std::uniform_int_distribution<int> chr_dist(32, 126);
    std::string out;
    const std::size_t len = len_dist(rng);
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(static_cast<char>(chr_dist(rng)));
    }
    return out;
}

// Mixes multibyte codepoints in so truncation hits UTF-8 boundaries.
std::string random_mixed(std::mt19937_64& rng, std::size_t max_codepoints) {
    static const std::vector<std::string> pool = {
        "a", "b", "Z", "9", " ", "\"", "\\", "{", "\n", "\t",
        "\xc3\xa9" /* e-acute */, "\xe6\xb0\x97" /* CJK */,
        "\xf0\x9f\x9a\x80" /* rocket */};
    std::uniform_int_distribution<std::size_t> len_dist(0, max_codepoints);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::string out;
    const std::size_t len = len_dist(rng);
    for (std::size_t i = 0; i < len; ++i) {
        out += pool[pick(rng)];
    }
    return out;
}

std::size_t codepoints(std::string_view text) {
    std::size_t n = 0;
    for (const unsigned char c : text) {
        if ((c & 0xc0) != 0x80) {
            ++n;
        }
    }
    return n;
}

// Independent truncation oracle: walk codepoint prefixes, keep the longest
// within the limit.
std::string truncate_reference(std::string_view text, std::size_t limit) {
    std::string best;
    std::string prefix;
    for (std::size_t i = 0; i < text.size();) {
        std::size_t step = 1;
        const auto c = static_cast<unsigned char>(text[i]);
        if ((c & 0xf8) == 0xf0) {
            step = 4;
        } else if ((c & 0xf0) == 0xe0) {
            step = 3;
        } else if ((c & 0xe0) == 0xc0) {
            step = 2;
        }
        prefix.append(text.substr(i, step));
        if (count_tokens(prefix) <= limit) {
            best = prefix;
        }
        i += step;
    }
    return best;
}

ApiRequest fixture_request() {
    ApiRequest request;
    request.category = "Weather";
    request.tool_name = "open_weather";
    request.api_name = "current_conditions";
    request.tool_input = R"({"location":"Oslo","units":"metric"})";
    return request;
}

}  // namespace

TEST_CASE("outcome fixtures classify with full agreement") {
    REQUIRE(kOutcomeCases.size() >= 30);
    const auto started = std::chrono::steady_clock::now();
    for (const auto& c : kOutcomeCases) {
        CAPTURE(c.error);
        CAPTURE(c.response);
        CHECK(classify_outcome(c.error, c.response) == c.want);
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed)
              .count() < 1000);
}

TEST_CASE("outcome fuzz: 10k strings, one label each, deterministic") {
    std::mt19937_64 rng(20260822);
    static const std::vector<std::string> shards = {
        "", "HTTP", "404", "parameter", "timeout", "authorize", "not found",
        "Function executing from", "undefined", "401"};
    std::uniform_int_distribution<std::size_t> pick(0, shards.size() - 1);
    const auto started = std::chrono::steady_clock::now();
    for (int i = 0; i < 10000; ++i) {
        std::string error = random_ascii(rng, 40);
        std::string response = random_ascii(rng, 40);
        if (i % 3 == 0) {
            error += shards[pick(rng)];
        }
        if (i % 5 == 0) {
            response += shards[pick(rng)];
        }
        const CallOutcome got = classify_outcome(error, response);
        // Total function: exactly one of the seven labels, stable on repeat.
        CHECK(to_string(got) == std::string(to_string(got)));
        CHECK(classify_outcome(error, response) == got);
        CHECK_NOTHROW(outcome_from_string(to_string(got)));
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed)
              .count() < 1000);
}

TEST_CASE("retainable failures are exactly ParameterChange") {
    CHECK(is_retainable_failure(CallOutcome::ParameterChange));
    CHECK_FALSE(is_retainable_failure(CallOutcome::Success));
    CHECK_FALSE(is_retainable_failure(CallOutcome::NotFound));
    CHECK_FALSE(is_retainable_failure(CallOutcome::NotConnected));
    CHECK_FALSE(is_retainable_failure(CallOutcome::NotAuthorised));
    CHECK_FALSE(is_retainable_failure(CallOutcome::ParsingError));
    CHECK_FALSE(is_retainable_failure(CallOutcome::OtherError));
}

TEST_CASE("envelope serialization round-trips 1000 randomized envelopes") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        ApiResponse original;
        original.error = random_mixed(rng, 30);
        original.response = random_mixed(rng, 60);
        if (i % 2 == 0) {
            original.mechanism = random_mixed(rng, 40);
        }
        const std::string wire = serialize_envelope(original);
        const ApiResponse parsed = parse_envelope(wire);
        CHECK(parsed.error == original.error);
        CHECK(parsed.response == original.response);
        CHECK(parsed.mechanism == original.mechanism);
        // Key order on the wire: mechanism (when present) leads.
        if (original.mechanism) {
            CHECK(wire.rfind("{\"mechanism_of_the_api\":", 0) == 0);
        } else {
            CHECK(wire.rfind("{\"error\":", 0) == 0);
        }
    }
}

TEST_CASE("envelope parser accepts any key order and rejects junk") {
    const ApiResponse a =
        parse_envelope(R"({"response":"ok","error":""})");
    CHECK(a.error.empty());
    CHECK(a.response == "ok");
    CHECK_FALSE(a.mechanism.has_value());

    const ApiResponse b = parse_envelope(
        R"({"error":"","mechanism_of_the_api":"m","response":"r"})");
    CHECK(b.mechanism == "m");

    CHECK_THROWS_AS(parse_envelope("not json"), MalformedEnvelope);
    CHECK_THROWS_AS(parse_envelope("[1,2]"), MalformedEnvelope);
    CHECK_THROWS_AS(parse_envelope(R"({"error":""})"), MalformedEnvelope);
    CHECK_THROWS_AS(parse_envelope(R"({"error":1,"response":"x"})"),
                    MalformedEnvelope);
}

TEST_CASE("canonical key ignores tool_input key order and spacing") {
    ApiRequest a = fixture_request();
    ApiRequest b = fixture_request();
    b.tool_input = R"({ "units" : "metric", "location" : "Oslo" })";
    CHECK(canonical_key(a) == canonical_key(b));

    ApiRequest c = fixture_request();
    c.tool_input = R"({"location":"Bergen","units":"metric"})";
    CHECK(canonical_key(a) != canonical_key(c));

    // Unit-separator joins keep the fields from bleeding into each other.
    CHECK(canonical_key(a).find('\x1f') != std::string::npos);

    ApiRequest d = fixture_request();
    d.api_name = "hourly_forecast";
    CHECK(canonical_key(a) != canonical_key(d));
}

TEST_CASE("token counting is ceil(codepoints / 4)") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("ab") == 1);
    CHECK(count_tokens("abcd") == 1);
    CHECK(count_tokens("abcde") == 2);
    CHECK(count_tokens("h\xc3\xa9llo") == 2);  // 5 codepoints
    CHECK(count_tokens("\xf0\x9f\x9a\x80\xf0\x9f\x9a\x80\xf0\x9f\x9a\x80"
                       "\xf0\x9f\x9a\x80") == 1);  // 4 codepoints, 16 bytes
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const std::string text = random_mixed(rng, 50);
        CHECK(count_tokens(text) == (codepoints(text) + 3) / 4);
    }
}

TEST_CASE("observation truncation matches the prefix oracle and is idempotent") {
    std::mt19937_64 rng(13);
    const std::size_t limits[] = {0, 1, 2, 3, 5, 8, 100};
    for (int i = 0; i < 200; ++i) {
        const std::string text = random_mixed(rng, 60);
        for (const std::size_t limit : limits) {
            const std::string got = truncate_observation(text, limit);
            CAPTURE(text);
            CAPTURE(limit);
            CHECK(got == truncate_reference(text, limit));
            CHECK(count_tokens(got) <= limit);
            CHECK(truncate_observation(got, limit) == got);
        }
    }
    CHECK(truncate_observation("anything", 0).empty());
    CHECK(truncate_observation("short", 100) == "short");
}

TEST_CASE("pair records classify at record time and round-trip through JSONL") {
    ApiDocument doc;
    doc.category = "Weather";
    doc.tool_name = "open_weather";
    doc.tool_description = "weather data";
    doc.api_name = "current_conditions";
    doc.api_description = "latest observation";
    doc.required_parameters = {{"location", "STRING", "city", std::nullopt}};
    doc.validate();

    ApiResponse failing;
    failing.error = "missing required parameter location";
    const PairRecord bad = make_pair_record(doc, fixture_request(), failing,
                                            Provenance::Real, std::nullopt,
                                            "2026-01-01T00:00:00Z");
    CHECK(bad.outcome == CallOutcome::ParameterChange);
    CHECK(bad.doc_key == doc.key());

    ApiResponse fine;
    fine.response = "{\"ok\":true}";
    PairRecord good = make_pair_record(doc, fixture_request(), fine,
                                       Provenance::Synthetic, "a scenario",
                                       "2026-01-01T00:00:00Z");
    good.rationale = "because the docs say so";
    CHECK(good.outcome == CallOutcome::Success);

    const auto dir = testutil::scratch_dir("core_records");
    write_records(dir / "pairs.jsonl", {bad, good});
    const auto back = read_records(dir / "pairs.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(to_json(back[0]).dump() == to_json(bad).dump());
    CHECK(to_json(back[1]).dump() == to_json(good).dump());
}

TEST_CASE("document validation rejects contradictions") {
    ApiDocument doc;
    doc.category = "X";
    doc.tool_name = "t";
    doc.api_name = "a";
    doc.required_parameters = {{"p", "STRING", "", std::nullopt}};
    doc.optional_parameters = {{"p", "STRING", "", std::nullopt}};
    CHECK_THROWS_AS(doc.validate(), InvalidRecord);

    ApiDocument empty;
    CHECK_THROWS_AS(empty.validate(), InvalidRecord);
}
