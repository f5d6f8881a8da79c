#include "apisim/core.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>

namespace apisim {
namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_any(const std::string& haystack_lower,
                  const std::vector<std::string>& needles) {
    for (const auto& needle : needles) {
        if (haystack_lower.find(lower(needle)) != std::string::npos) {
            return true;
        }
    }
    return false;
}

// Matches a status code only as a maximal digit run, so "404" does not fire
// inside "1404" or "4040".
bool contains_code(std::string_view text, std::string_view code) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (text.substr(start, i - start) == code) {
            return true;
        }
    }
    return false;
}

bool contains_any_code(std::string_view a, std::string_view b,
                       const std::vector<std::string>& codes) {
    for (const auto& code : codes) {
        if (contains_code(a, code) || contains_code(b, code)) {
            return true;
        }
    }
    return false;
}

std::string strip_code_fence(std::string_view text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) {
        return "";
    }
    auto end = text.find_last_not_of(" \t\r\n");
    std::string_view body = text.substr(begin, end - begin + 1);
    if (body.substr(0, 3) == "```") {
        auto eol = body.find('\n');
        if (eol == std::string_view::npos) {
            return "";
        }
        body.remove_prefix(eol + 1);
        auto tail = body.rfind("```");
        if (tail != std::string_view::npos) {
            body = body.substr(0, tail);
        }
        auto e2 = body.find_last_not_of(" \t\r\n");
        body = (e2 == std::string_view::npos) ? std::string_view{} : body.substr(0, e2 + 1);
    }
    return std::string(body);
}

// Number of UTF-8 codepoints; continuation bytes do not count.
std::size_t codepoint_count(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) {
            ++n;
        }
    }
    return n;
}

// Byte offset of the prefix holding the first `codepoints` codepoints.
std::size_t byte_offset_for_codepoints(std::string_view text, std::size_t codepoints) {
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
            if (seen == codepoints) {
                return i;
            }
            ++seen;
        }
        ++i;
    }
    return text.size();
}

std::string require_string_field(const json& j, const char* key, const char* what) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw MalformedEnvelope(std::string(what) + ": missing key \"" + key + "\"");
    }
    if (!it->is_string()) {
        throw MalformedEnvelope(std::string(what) + ": key \"" + key +
                                "\" is not a string");
    }
    return it->get<std::string>();
}

std::string coerce_to_text(const json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

constexpr char kKeySeparator = '\x1f';

}  // namespace

std::string ApiDocument::key() const {
    return make_doc_key(category, tool_name, api_name);
}

void ApiDocument::validate() const {
    if (api_name.empty() || tool_name.empty()) {
        throw InvalidRecord("document has an empty api_name or tool_name");
    }
    auto check_unique = [](const std::vector<ParameterSpec>& params, const char* which) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].name.empty()) {
                throw InvalidRecord(std::string("empty parameter name in ") + which);
            }
            for (std::size_t k = i + 1; k < params.size(); ++k) {
                if (params[i].name == params[k].name) {
                    throw InvalidRecord("duplicate parameter \"" + params[i].name +
                                        "\" in " + which);
                }
            }
        }
    };
    check_unique(required_parameters, "required_parameters");
    check_unique(optional_parameters, "optional_parameters");
    for (const auto& req : required_parameters) {
        for (const auto& opt : optional_parameters) {
            if (req.name == opt.name) {
                throw InvalidRecord("parameter \"" + req.name +
                                    "\" listed as both required and optional");
            }
        }
    }
}

CallOutcome classify_outcome(std::string_view error, std::string_view response,
                             const OutcomeRules& rules) {
    const std::string err = lower(error);
    const std::string resp = lower(response);

    if (!rules.parsing_error_prefix.empty() &&
        err.rfind(lower(rules.parsing_error_prefix), 0) == 0) {
        return CallOutcome::ParsingError;
    }
    if (contains_any(err, rules.not_connected_error) ||
        contains_any(resp, rules.not_connected_response)) {
        return CallOutcome::NotConnected;
    }
    if (contains_any(err, rules.not_found) || contains_any(resp, rules.not_found) ||
        contains_any_code(error, response, rules.not_found_codes)) {
        return CallOutcome::NotFound;
    }
    if (contains_any(err, rules.not_authorised) ||
        contains_any(resp, rules.not_authorised) ||
        contains_any_code(error, response, rules.not_authorised_codes)) {
        return CallOutcome::NotAuthorised;
    }
    if (contains_any(err, rules.parameter_change) ||
        contains_any(resp, rules.parameter_change)) {
        return CallOutcome::ParameterChange;
    }
    if (!error.empty()) {
        return CallOutcome::OtherError;
    }
    return CallOutcome::Success;
}

CallOutcome classify_outcome(std::string_view error, std::string_view response) {
    static const OutcomeRules kDefault{};
    return classify_outcome(error, response, kDefault);
}

bool is_retainable_failure(CallOutcome outcome) {
    return outcome == CallOutcome::ParameterChange;
}

const char* to_string(CallOutcome outcome) {
    switch (outcome) {
        case CallOutcome::NotConnected: return "NotConnected";
        case CallOutcome::NotFound: return "NotFound";
        case CallOutcome::ParameterChange: return "ParameterChange";
        case CallOutcome::ParsingError: return "ParsingError";
        case CallOutcome::NotAuthorised: return "NotAuthorised";
        case CallOutcome::OtherError: return "OtherError";
        case CallOutcome::Success: return "Success";
    }
    return "Success";
}

CallOutcome outcome_from_string(std::string_view text) {
    static const CallOutcome all[] = {
        CallOutcome::NotConnected,   CallOutcome::NotFound,
        CallOutcome::ParameterChange, CallOutcome::ParsingError,
        CallOutcome::NotAuthorised,  CallOutcome::OtherError,
        CallOutcome::Success,
    };
    for (CallOutcome o : all) {
        if (text == to_string(o)) {
            return o;
        }
    }
    throw InvalidRecord("unknown outcome \"" + std::string(text) + "\"");
}

const char* to_string(Provenance provenance) {
    return provenance == Provenance::Real ? "real" : "synthetic";
}

Provenance provenance_from_string(std::string_view text) {
    if (text == "real") {
        return Provenance::Real;
    }
    if (text == "synthetic") {
        return Provenance::Synthetic;
    }
    throw InvalidRecord("unknown provenance \"" + std::string(text) + "\"");
}

const char* to_string(SimulationMode mode) {
    return mode == SimulationMode::Sft ? "sft" : "cot";
}

SimulationMode mode_from_string(std::string_view text) {
    if (text == "sft" || text == "SFT") {
        return SimulationMode::Sft;
    }
    if (text == "cot" || text == "CoT" || text == "COT") {
        return SimulationMode::Cot;
    }
    throw InvalidRecord("unknown simulation mode \"" + std::string(text) + "\"");
}

ApiResponse parse_envelope(std::string_view text) {
    const std::string body = strip_code_fence(text);
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw MalformedEnvelope(std::string("envelope is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw MalformedEnvelope("envelope is not a JSON object");
    }
    ApiResponse out;
    out.error = require_string_field(j, "error", "envelope");
    out.response = require_string_field(j, "response", "envelope");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "error" || key == "response") {
            continue;
        }
        if (key == "mechanism_of_the_api") {
            if (!it->is_string()) {
                throw MalformedEnvelope("envelope: mechanism_of_the_api is not a string");
            }
            out.mechanism = it->get<std::string>();
            continue;
        }
        throw MalformedEnvelope("envelope: unexpected key \"" + key + "\"");
    }
    return out;
}

std::string serialize_envelope(const ApiResponse& response) {
    ojson j;
    if (response.mechanism.has_value()) {
        j["mechanism_of_the_api"] = *response.mechanism;
    }
    j["error"] = response.error;
    j["response"] = response.response;
    return j.dump();
}

ApiResponse envelope_from_upstream(std::string_view body) {
    json j;
    try {
        j = json::parse(strip_code_fence(body));
    } catch (const json::exception& e) {
        throw MalformedEnvelope(std::string("upstream body is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("error") || !j.contains("response")) {
        throw MalformedEnvelope("upstream body lacks the {error, response} envelope");
    }
    ApiResponse out;
    out.error = coerce_to_text(j["error"]);
    out.response = coerce_to_text(j["response"]);
    if (j.contains("mechanism_of_the_api")) {
        out.mechanism = coerce_to_text(j["mechanism_of_the_api"]);
    }
    return out;
}

std::string canonical_key(const ApiRequest& request) {
    json payload;
    try {
        payload = json::parse(request.tool_input);
    } catch (const json::exception& e) {
        throw InvalidToolInput(std::string("tool_input is not valid JSON: ") + e.what());
    }
    if (!payload.is_object()) {
        throw InvalidToolInput("tool_input is not a JSON object");
    }
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    std::string key;
    key.reserve(request.category.size() + request.tool_name.size() +
                request.api_name.size() + 16);
    key += request.category;
    key += kKeySeparator;
    key += request.tool_name;
    key += kKeySeparator;
    key += request.api_name;
    key += kKeySeparator;
    key += payload.dump();
    return key;
}

std::string make_doc_key(std::string_view category, std::string_view tool_name,
                         std::string_view api_name) {
    std::string key;
    key.reserve(category.size() + tool_name.size() + api_name.size() + 2);
    key += category;
    key += kKeySeparator;
    key += tool_name;
    key += kKeySeparator;
    key += api_name;
    return key;
}

std::size_t count_tokens(std::string_view text) {
    return (codepoint_count(text) + 3) / 4;
}

std::string truncate_observation(std::string_view text, std::size_t limit,
                                 const TokenCounter& counter) {
    const TokenCounter& count = counter ? counter : TokenCounter(count_tokens);
    if (count(text) <= limit) {
        return std::string(text);
    }
    // Binary search over codepoint prefixes; the counter is monotone in
    // prefix extension.
    std::size_t lo = 0;
    std::size_t hi = codepoint_count(text);
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        auto prefix = text.substr(0, byte_offset_for_codepoints(text, mid));
        if (count(prefix) <= limit) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return std::string(text.substr(0, byte_offset_for_codepoints(text, lo)));
}

ojson to_json(const ParameterSpec& spec) {
    ojson j;
    j["name"] = spec.name;
    j["type"] = spec.type_hint;
    j["description"] = spec.description;
    if (spec.default_value.has_value()) {
        j["default"] = *spec.default_value;
    }
    return j;
}

ojson to_json(const ApiDocument& doc) {
    ojson j;
    j["category"] = doc.category;
    j["tool_name"] = doc.tool_name;
    j["tool_description"] = doc.tool_description;
    j["api_name"] = doc.api_name;
    j["api_description"] = doc.api_description;
    ojson required = ojson::array();
    for (const auto& p : doc.required_parameters) {
        required.push_back(to_json(p));
    }
    ojson optional = ojson::array();
    for (const auto& p : doc.optional_parameters) {
        optional.push_back(to_json(p));
    }
    j["required_parameters"] = std::move(required);
    j["optional_parameters"] = std::move(optional);
    return j;
}

ojson to_json(const ApiRequest& request) {
    ojson j;
    j["category"] = request.category;
    j["tool_name"] = request.tool_name;
    j["api_name"] = request.api_name;
    j["tool_input"] = request.tool_input;
    j["strip"] = request.strip;
    return j;
}

ojson to_json(const ApiResponse& response) {
    return ojson::parse(serialize_envelope(response));
}

ojson to_json(const PairRecord& record) {
    ojson j;
    j["doc_key"] = record.doc_key;
    j["request"] = to_json(record.request);
    j["response"] = to_json(record.response);
    j["outcome"] = to_string(record.outcome);
    j["provenance"] = to_string(record.provenance);
    if (record.rationale.has_value()) {
        j["rationale"] = *record.rationale;
    }
    if (record.scenario.has_value()) {
        j["scenario"] = *record.scenario;
    }
    j["collected_at"] = record.collected_at;
    return j;
}

namespace {

std::string get_string(const json& j, const char* key, const char* what,
                       std::optional<std::string> fallback = std::nullopt) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (fallback.has_value()) {
            return *fallback;
        }
        throw InvalidRecord(std::string(what) + ": missing key \"" + key + "\"");
    }
    if (!it->is_string()) {
        throw InvalidRecord(std::string(what) + ": key \"" + key + "\" is not a string");
    }
    return it->get<std::string>();
}

}  // namespace

ParameterSpec parameter_spec_from_json(const json& j) {
    ParameterSpec spec;
    spec.name = get_string(j, "name", "parameter");
    spec.type_hint = get_string(j, "type", "parameter", std::string{});
    spec.description = get_string(j, "description", "parameter", std::string{});
    if (j.contains("default") && !j["default"].is_null()) {
        spec.default_value = coerce_to_text(j["default"]);
    }
    return spec;
}

ApiDocument document_from_json(const json& j) {
    ApiDocument doc;
    doc.category = get_string(j, "category", "document", std::string{});
    doc.tool_name = get_string(j, "tool_name", "document");
    doc.tool_description = get_string(j, "tool_description", "document", std::string{});
    doc.api_name = get_string(j, "api_name", "document");
    doc.api_description = get_string(j, "api_description", "document", std::string{});
    for (const char* key : {"required_parameters", "optional_parameters"}) {
        if (!j.contains(key)) {
            continue;
        }
        if (!j.at(key).is_array()) {
            throw InvalidRecord(std::string("document: ") + key + " is not an array");
        }
        auto& target = std::string_view(key) == "required_parameters"
                           ? doc.required_parameters
                           : doc.optional_parameters;
        for (const auto& p : j.at(key)) {
            target.push_back(parameter_spec_from_json(p));
        }
    }
    doc.validate();
    return doc;
}

ApiRequest request_from_json(const json& j) {
    ApiRequest request;
    request.category = get_string(j, "category", "request", std::string{});
    request.tool_name = get_string(j, "tool_name", "request");
    request.api_name = get_string(j, "api_name", "request");
    if (auto it = j.find("tool_input"); it != j.end()) {
        // Accept both the text form and an inline object.
        request.tool_input = it->is_string() ? it->get<std::string>() : it->dump();
    }
    request.strip = get_string(j, "strip", "request", std::string("filter"));
    return request;
}

ApiResponse response_from_json(const json& j) {
    ApiResponse response;
    response.error = get_string(j, "error", "response");
    response.response = get_string(j, "response", "response");
    if (j.contains("mechanism_of_the_api")) {
        response.mechanism = get_string(j, "mechanism_of_the_api", "response");
    }
    return response;
}

PairRecord record_from_json(const json& j) {
    PairRecord record;
    record.doc_key = get_string(j, "doc_key", "record");
    if (!j.contains("request") || !j.contains("response")) {
        throw InvalidRecord("record: missing request or response");
    }
    record.request = request_from_json(j.at("request"));
    record.response = response_from_json(j.at("response"));
    record.outcome = outcome_from_string(get_string(j, "outcome", "record"));
    record.provenance = provenance_from_string(get_string(j, "provenance", "record"));
    if (j.contains("rationale") && !j["rationale"].is_null()) {
        record.rationale = get_string(j, "rationale", "record");
    }
    if (j.contains("scenario") && !j["scenario"].is_null()) {
        record.scenario = get_string(j, "scenario", "record");
    }
    record.collected_at = get_string(j, "collected_at", "record", std::string{});
    return record;
}

std::string rfc3339_now() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

PairRecord make_pair_record(const ApiDocument& doc, ApiRequest request,
                            ApiResponse response, Provenance provenance,
                            std::optional<std::string> scenario,
                            std::string collected_at) {
    PairRecord record;
    record.doc_key = doc.key();
    record.outcome = classify_outcome(response.error, response.response);
    record.request = std::move(request);
    record.response = std::move(response);
    record.provenance = provenance;
    record.scenario = std::move(scenario);
    record.collected_at = std::move(collected_at);
    return record;
}

}  // namespace apisim
