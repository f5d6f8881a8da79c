#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace apisim {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend emitted something that is not a valid response envelope.
struct MalformedEnvelope : Error {
    using Error::Error;
};

// tool_input does not parse as a JSON object.
struct InvalidToolInput : Error {
    using Error::Error;
};

// A record or document read from disk violates its invariants.
struct InvalidRecord : Error {
    using Error::Error;
};

/// One required or optional parameter row of an API's documentation.
struct ParameterSpec {
    std::string name;
    std::string type_hint;
    std::string description;
    std::optional<std::string> default_value;
};

/// Documentation record for a single API within a tool.
struct ApiDocument {
    std::string category;
    std::string tool_name;
    std::string tool_description;
    std::string api_name;
    std::string api_description;
    std::vector<ParameterSpec> required_parameters;
    std::vector<ParameterSpec> optional_parameters;

    // Routing key shared with ApiRequest resolution.
    std::string key() const;

    // Throws InvalidRecord on empty names or a parameter listed as both
    // required and optional.
    void validate() const;
};

/// A concrete call: routing fields plus the JSON-text payload.
struct ApiRequest {
    std::string category;
    std::string tool_name;
    std::string api_name;
    std::string tool_input = "{}";  // JSON object, as text
    std::string strip = "filter";   // carried opaquely, never interpreted
};

/// The response envelope {error, response}, with the optional
/// mechanism rationale emitted ahead of both fields in CoT mode.
struct ApiResponse {
    std::string error;
    std::string response;
    std::optional<std::string> mechanism;
};

enum class CallOutcome {
    NotConnected,
    NotFound,
    ParameterChange,
    ParsingError,
    NotAuthorised,
    OtherError,
    Success,
};

enum class Provenance { Real, Synthetic };

/// The two serving/training regimes. CoT prefixes the system prompt with a
/// literal tag line and adds the mechanism rationale to the envelope.
enum class SimulationMode { Sft, Cot };

/// A collected or synthesized request-response pair.
struct PairRecord {
    std::string doc_key;
    ApiRequest request;
    ApiResponse response;
    CallOutcome outcome = CallOutcome::Success;
    Provenance provenance = Provenance::Real;
    std::optional<std::string> rationale;
    std::optional<std::string> scenario;
    std::string collected_at;  // RFC 3339
};

/// Keyword rules for call-outcome classification. Defaults match the
/// shipped rule set; the parameter keyword list is config-overridable.
struct OutcomeRules {
    std::string parsing_error_prefix = "Function executing from";
    std::vector<std::string> not_connected_error = {"HTTP"};
    std::vector<std::string> not_connected_response = {"HTTP error", "connection",
                                                       "rate limit", "timeout"};
    std::vector<std::string> not_found = {"not found", "not available",
                                          "API doesn't exists", "Service Not Found",
                                          "internal error"};
    std::vector<std::string> not_found_codes = {"404"};
    std::vector<std::string> not_authorised = {"authorize", "unauthorized",
                                               "blocked user", "unsubscribe",
                                               "credential",
                                               "disabled for your subscription"};
    std::vector<std::string> not_authorised_codes = {"401", "403"};
    std::vector<std::string> parameter_change = {"parameter", "parse", "parsing",
                                                 "undefined"};
};

/// Maps an (error, response) text pair to exactly one outcome. Total and
/// deterministic: first match wins in the order ParsingError, NotConnected,
/// NotFound, NotAuthorised, ParameterChange, OtherError, Success. Keyword
/// matching is case-insensitive; status codes match standalone digit runs
/// only.
CallOutcome classify_outcome(std::string_view error, std::string_view response,
                             const OutcomeRules& rules);
CallOutcome classify_outcome(std::string_view error, std::string_view response);

/// True iff the outcome is a parameter-related failure worth keeping.
bool is_retainable_failure(CallOutcome outcome);

const char* to_string(CallOutcome outcome);
CallOutcome outcome_from_string(std::string_view text);

const char* to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view text);

const char* to_string(SimulationMode mode);
SimulationMode mode_from_string(std::string_view text);

/// Parses a backend completion into an envelope. Strips surrounding
/// whitespace and one optional markdown code fence; requires string-valued
/// "error" and "response" keys; accepts string "mechanism_of_the_api";
/// rejects anything else. Throws MalformedEnvelope.
ApiResponse parse_envelope(std::string_view text);

/// Compact JSON with keys in the order mechanism_of_the_api (when present),
/// error, response. parse_envelope(serialize_envelope(r)) == r.
std::string serialize_envelope(const ApiResponse& response);

/// Lenient conversion for payloads from real upstreams: non-string error /
/// response values are re-serialized to compact JSON text instead of being
/// rejected. Still requires a JSON object with both keys present.
ApiResponse envelope_from_upstream(std::string_view body);

/// Deterministic request identity: routing fields plus tool_input
/// re-serialized with sorted keys and no insignificant whitespace, joined
/// by U+001F. Invariant under key order and whitespace of tool_input.
/// Throws InvalidToolInput when tool_input is not a JSON object.
std::string canonical_key(const ApiRequest& request);

/// Routing key for a (category, tool, api) triple.
std::string make_doc_key(std::string_view category, std::string_view tool_name,
                         std::string_view api_name);

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Supplies RFC 3339 timestamps; injectable so pipelines can be made
/// byte-reproducible.
using TimeSource = std::function<std::string()>;

/// Sink for structured progress lines; an empty function means silent.
using Logger = std::function<void(std::string_view)>;

/// Current UTC time, e.g. "2026-08-22T12:00:00Z".
std::string rfc3339_now();

/// Default token-count heuristic: ceil(codepoints / 4). Monotone in prefix
/// extension.
std::size_t count_tokens(std::string_view text);

/// Longest prefix (on codepoint boundaries) whose token count stays within
/// limit. Uses count_tokens when no counter is supplied. Idempotent.
std::string truncate_observation(std::string_view text, std::size_t limit,
                                 const TokenCounter& counter = {});

// JSON serialization. Emitters use ordered keys so that on-disk layouts are
// stable; parsers accept any key order.
ojson to_json(const ParameterSpec& spec);
ojson to_json(const ApiDocument& doc);
ojson to_json(const ApiRequest& request);
ojson to_json(const ApiResponse& response);
ojson to_json(const PairRecord& record);
ParameterSpec parameter_spec_from_json(const json& j);
ApiDocument document_from_json(const json& j);
ApiRequest request_from_json(const json& j);
ApiResponse response_from_json(const json& j);
PairRecord record_from_json(const json& j);

/// Builds a record with the outcome computed from the response at record
/// time; synthetic records never carry a rationale at creation.
PairRecord make_pair_record(const ApiDocument& doc, ApiRequest request,
                            ApiResponse response, Provenance provenance,
                            std::optional<std::string> scenario,
                            std::string collected_at);

}  // namespace apisim
