#include "apisim/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include "apisim/prompts.hpp"

namespace apisim::backends {
namespace {

const char* role_tag(Role role) {
    switch (role) {
        case Role::System:
            return "system";
        case Role::User:
            return "user";
        case Role::Assistant:
            return "assistant";
    }
    return "user";
}

std::string format_temperature(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", t);
    return buf;
}

std::string hex8(std::uint64_t h) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(h & 0xffffffffull));
    return buf;
}

/// Splits "http://host:port/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_origin(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        return {url, ""};
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, ""};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::chrono::milliseconds jittered_backoff(std::chrono::milliseconds base,
                                           int attempt) {
    // Full jitter: uniform over [0, base * 2^attempt].
    const auto cap = base.count() << std::min(attempt, 20);
    if (cap <= 0) {
        return std::chrono::milliseconds{0};
    }
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_int_distribution<long long> dist(0, cap);
    return std::chrono::milliseconds{dist(rng)};
}

bool transient_status(int status) {
    return status == 0 || status == 429 || status >= 500;
}

struct RetryContext {
    const BackendConfig& config;
    HttpTransport& transport;
    const Sleeper& sleeper;
    BoundedGate& gate;
};

/// Shared POST-with-retry: transient statuses retry with backoff, other
/// non-2xx statuses refuse immediately.
HttpResult post_with_retry(RetryContext ctx, const std::string& url,
                           const std::vector<Header>& headers,
                           const std::string& body) {
    HttpResult last;
    for (int attempt = 0; attempt < ctx.config.max_attempts; ++attempt) {
        ctx.gate.acquire();
        last = ctx.transport.post(url, headers, body, ctx.config.request_timeout);
        ctx.gate.release();
        if (last.status >= 200 && last.status < 300) {
            return last;
        }
        if (!transient_status(last.status)) {
            throw BackendRefused("backend refused " + url + " with status " +
                                 std::to_string(last.status) + ": " + last.body);
        }
        if (attempt + 1 < ctx.config.max_attempts) {
            ctx.sleeper(jittered_backoff(ctx.config.backoff_base, attempt));
        }
    }
    std::string reason = last.status == 0 ? last.detail
                                          : "status " + std::to_string(last.status);
    throw BackendUnavailable("backend unavailable after " +
                             std::to_string(ctx.config.max_attempts) +
                             " attempts to " + url + " (" + reason + ")");
}

std::vector<Header> auth_headers(const std::string& api_key) {
    std::vector<Header> headers{{"Content-Type", "application/json"}};
    if (!api_key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + api_key);
    }
    return headers;
}

std::string resolve_key_or_refuse(const BackendConfig& config) {
    if (config.api_key_env_var.empty()) {
        return config.api_key.value_or("");
    }
    if (const char* env = std::getenv(config.api_key_env_var.c_str());
        env != nullptr && *env != '\0') {
        return env;
    }
    if (config.api_key.has_value() && !config.api_key->empty()) {
        return *config.api_key;
    }
    throw BackendRefused("api key env var " + config.api_key_env_var +
                         " is unset and no fallback key is configured");
}

ojson chat_body(const BackendConfig& config,
                const std::vector<ChatMessage>& messages,
                const GenerationParams& params) {
    ojson body;
    body["model"] = config.model_id;
    ojson msgs = ojson::array();
    for (const auto& m : messages) {
        ojson jm;
        jm["role"] = role_tag(m.role);
        jm["content"] = m.content;
        msgs.push_back(std::move(jm));
    }
    body["messages"] = std::move(msgs);
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (params.seed.has_value()) {
        body["seed"] = *params.seed;
    }
    return body;
}

class DefaultHttpTransport : public HttpTransport {
public:
    HttpResult post(const std::string& url, const std::vector<Header>& headers,
                    const std::string& body,
                    std::chrono::milliseconds timeout) override {
        auto [origin, path] = split_origin(url);
        httplib::Client client(origin);
        configure(client, timeout);
        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [name, value] : headers) {
            if (name == "Content-Type") {
                content_type = value;
            } else {
                h.emplace(name, value);
            }
        }
        auto res = client.Post(path.empty() ? "/" : path, h, body, content_type);
        return to_result(res);
    }

    HttpResult get(const std::string& url,
                   std::chrono::milliseconds timeout) override {
        auto [origin, path] = split_origin(url);
        httplib::Client client(origin);
        configure(client, timeout);
        auto res = client.Get(path.empty() ? "/" : path);
        return to_result(res);
    }

private:
    static void configure(httplib::Client& client,
                          std::chrono::milliseconds timeout) {
        const auto secs = std::max<long>(1, timeout.count() / 1000);
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        client.set_write_timeout(secs, 0);
    }

    static HttpResult to_result(const httplib::Result& res) {
        if (!res) {
            return {0, "", httplib::to_string(res.error())};
        }
        return {res->status, res->body, ""};
    }
};

// ---------------------------------------------------------------------------
// Mock generation: everything below derives only from the message contents,
// the seed, and the temperature, so outputs are stable across processes.

std::string line_value(const std::string& text, const std::string& marker) {
    const auto pos = text.find(marker);
    if (pos == std::string::npos) {
        return "";
    }
    const auto start = pos + marker.size();
    const auto end = text.find('\n', start);
    return text.substr(start, end == std::string::npos ? std::string::npos
                                                       : end - start);
}

std::vector<std::string> required_param_names(const std::string& prompt) {
    std::vector<std::string> names;
    const std::string raw = line_value(prompt, "Required Parameters: ");
    if (raw.empty()) {
        return names;
    }
    try {
        const json arr = json::parse(raw);
        for (const auto& p : arr) {
            if (p.contains("name") && p["name"].is_string()) {
                names.push_back(p["name"].get<std::string>());
            }
        }
    } catch (const json::exception&) {
        // Malformed docs yield a parameterless call.
    }
    return names;
}

std::string tool_input_for(const std::vector<std::string>& params,
                           std::uint64_t h) {
    if (params.empty()) {
        return "{}";
    }
    ojson input;
    std::uint64_t cursor = h;
    for (const auto& name : params) {
        cursor = fnv1a64(name, cursor);
        input[name] = name + "_" + hex8(cursor);
    }
    return input.dump();
}

std::string written_call(const std::string& prompt, std::uint64_t h) {
    ojson call;
    call["category"] = line_value(prompt, "Tool Category: ");
    call["tool_name"] = line_value(prompt, "Tool Name: ");
    call["api_name"] = line_value(prompt, "API Name: ");
    call["tool_input"] = tool_input_for(required_param_names(prompt), h);
    call["strip"] = "filter";
    return call.dump();
}

std::string scenario_text(const std::string& prompt, std::uint64_t h) {
    const std::string tool = line_value(prompt, "Tool Name: ");
    const std::string api = line_value(prompt, "API Name: ");
    static const char* kPersonas[] = {
        "A freelance developer", "A data analyst at a logistics startup",
        "A product manager preparing a launch", "A hobbyist building a dashboard"};
    static const char* kGoals[] = {
        "automate a weekly report", "enrich customer records",
        "prototype a new feature", "validate an integration before release"};
    std::string out = kPersonas[h % 4];
    out += " wants to ";
    out += kGoals[(h >> 8) % 4];
    out += " and turns to the " + tool + " tool, calling its \"" + api +
           "\" API to retrieve the data they need (case " + hex8(h) + ").";
    return out;
}

std::string simulated_payload(const std::string& user_prompt, std::uint64_t h) {
    const std::string api = line_value(user_prompt, "API Name: ");
    ojson inner;
    inner["status"] = "success";
    inner["summary"] = api + " result " + hex8(h);
    ojson items = ojson::array();
    const int n = 1 + static_cast<int>(h % 3);
    std::uint64_t cursor = h;
    for (int i = 0; i < n; ++i) {
        cursor = fnv1a64("item", cursor);
        ojson item;
        item["id"] = static_cast<long long>(cursor % 100000);
        item["value"] = "entry_" + hex8(cursor);
        items.push_back(std::move(item));
    }
    inner["items"] = std::move(items);
    return inner.dump();
}

std::string rationale_text(const std::string& prompt, std::uint64_t h) {
    const std::string api = line_value(prompt, "API Name: ");
    const std::string tool = line_value(prompt, "Tool Name: ");
    std::string out = "The " + api + " endpoint of " + tool;
    out +=
        " validates the supplied parameters against its documented schema, "
        "routes the call to the provider's backing service, and assembles a "
        "JSON payload whose fields mirror the documentation. Missing or "
        "malformed required parameters short-circuit into an error message "
        "rather than data, while well-formed calls return records assembled "
        "from the provider's store";
    out += " (trace " + hex8(h) + ").";
    return out;
}

std::string synthetic_pair(const std::string& prompt, std::uint64_t h) {
    ojson request;
    request["category"] = line_value(prompt, "Tool Category: ");
    request["tool_name"] = line_value(prompt, "Tool Name: ");
    request["api_name"] = line_value(prompt, "API Name: ");
    // Vary the input with the hash so seed sweeps produce distinct keys.
    auto params = required_param_names(prompt);
    ojson input;
    std::uint64_t cursor = fnv1a64("synthetic", h);
    for (const auto& name : params) {
        cursor = fnv1a64(name, cursor);
        input[name] = name + "_" + hex8(cursor);
    }
    input["variant"] = hex8(cursor);
    request["tool_input"] = input.dump();

    ojson response;
    response["error"] = "";
    response["response"] = simulated_payload(prompt, fnv1a64("resp", h));

    ojson pair;
    pair["request"] = std::move(request);
    pair["response"] = std::move(response);
    return pair.dump();
}

std::string generated_query(const std::string& prompt, std::uint64_t h) {
    // The INPUT section carries the sampled tools as JSON.
    const auto start = prompt.find("INPUT:\n");
    const auto end = prompt.rfind("\nOUTPUT:");
    ojson related = ojson::array();
    std::string narrative;
    if (start != std::string::npos && end != std::string::npos && end > start) {
        const std::string tools_json =
            prompt.substr(start + 7, end - (start + 7));
        try {
            const json tools = json::parse(tools_json);
            for (const auto& tool : tools) {
                if (!tool.contains("apis") || tool["apis"].empty()) {
                    continue;
                }
                const std::string tool_name = tool["tool_name"].get<std::string>();
                const auto& apis = tool["apis"];
                const auto& api = apis[h % apis.size()];
                const std::string api_name = api["api_name"].get<std::string>();
                related.push_back(ojson::array({tool_name, api_name}));
                if (!narrative.empty()) {
                    narrative += " Then use ";
                } else {
                    narrative += "Use ";
                }
                narrative += "the \"" + api_name + "\" function of " + tool_name;
                narrative += " with my reference code RQ-" + hex8(fnv1a64(tool_name, h));
                narrative += ".";
            }
        } catch (const json::exception&) {
            // Fall through to the generic fallback below.
        }
    }
    if (related.empty()) {
        narrative = "mock query " + hex8(h);
    }
    ojson out;
    out["query"] = "I am organizing project " + hex8(h) + ". " + narrative;
    out["related_apis"] = std::move(related);
    return out.dump();
}

std::string judge_reply(std::uint64_t h) {
    const int rating = 6 + static_cast<int>(h % 5);  // 6..10
    std::string out =
        "The simulated response stays within the documented schema and "
        "answers the request's parameters. Structure and content are "
        "consistent with the documentation (check " +
        hex8(h) + "). Rating: [[" + std::to_string(rating) + "]]";
    return out;
}

std::string fac_reply(std::uint64_t h) {
    const bool solved = (h % 4) != 0;  // deterministic mix of verdicts
    std::string out = "Answer Status ";
    out += solved ? "Solved" : "Unsolved";
    out += "\nReason\n";
    out += solved ? "The answer makes a genuine attempt to address every part "
                    "of the query."
                  : "The answer does not engage with the query's request.";
    out += " (case " + hex8(h) + ")";
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

BoundedGate::BoundedGate(int capacity) : slots_(std::max(1, capacity)) {}

void BoundedGate::acquire() {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [this] { return slots_ > 0; });
    --slots_;
}

void BoundedGate::release() {
    {
        std::lock_guard lock(mutex_);
        ++slots_;
    }
    available_.notify_one();
}

std::unique_ptr<HttpTransport> make_default_transport() {
    return std::make_unique<DefaultHttpTransport>();
}

HttpChatBackend::HttpChatBackend(BackendConfig config,
                                 std::unique_ptr<HttpTransport> transport,
                                 Sleeper sleeper)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : make_default_transport()),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) {
                             std::this_thread::sleep_for(d);
                         }),
      gate_(config_.max_in_flight) {}

std::string HttpChatBackend::chat(const std::vector<ChatMessage>& messages,
                                  const GenerationParams& params) {
    const std::string key = resolve_api_key();
    const std::string url = config_.endpoint_url + "/chat/completions";
    const std::string body = chat_body(config_, messages, params).dump();
    const HttpResult res = post_with_retry(
        {config_, *transport_, sleeper_, gate_}, url, auth_headers(key), body);
    try {
        const json payload = json::parse(res.body);
        return payload.at("choices").at(0).at("message").at("content")
            .get<std::string>();
    } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("unparseable completion payload: ") +
                                 e.what());
    }
}

bool HttpChatBackend::healthy() {
    try {
        const HttpResult res =
            transport_->get(config_.endpoint_url, config_.request_timeout);
        return res.status != 0;
    } catch (...) {
        return false;
    }
}

std::string HttpChatBackend::resolve_api_key() const {
    return resolve_key_or_refuse(config_);
}

HttpEmbedder::HttpEmbedder(BackendConfig config,
                           std::unique_ptr<HttpTransport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : make_default_transport()),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) {
                             std::this_thread::sleep_for(d);
                         }),
      gate_(config_.max_in_flight) {}

std::vector<std::vector<double>> HttpEmbedder::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw std::invalid_argument("embed: empty input list");
    }
    const std::string key = resolve_key_or_refuse(config_);
    ojson body;
    body["model"] = config_.model_id;
    body["input"] = texts;
    const std::string url = config_.endpoint_url + "/embeddings";
    const HttpResult res =
        post_with_retry({config_, *transport_, sleeper_, gate_}, url,
                        auth_headers(key), body.dump());
    std::vector<std::vector<double>> out;
    try {
        const json payload = json::parse(res.body);
        for (const auto& row : payload.at("data")) {
            out.push_back(row.at("embedding").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("unparseable embedding payload: ") +
                                 e.what());
    }
    if (out.size() != texts.size()) {
        throw BackendUnavailable("embedding count mismatch: got " +
                                 std::to_string(out.size()) + " for " +
                                 std::to_string(texts.size()) + " inputs");
    }
    for (const auto& v : out) {
        if (dimension_ == 0) {
            dimension_ = v.size();
        }
        if (v.size() != dimension_) {
            throw BackendUnavailable("inconsistent embedding dimensions");
        }
    }
    return out;
}

std::string MockChatBackend::chat(const std::vector<ChatMessage>& messages,
                                  const GenerationParams& params) {
    calls_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int seen = max_concurrency_.load();
    while (now > seen && !max_concurrency_.compare_exchange_weak(seen, now)) {
    }
    struct InFlight {
        std::atomic<int>& counter;
        ~InFlight() { counter.fetch_sub(1); }
    } guard{in_flight_};

    if (unavailable_.load()) {
        throw BackendUnavailable("mock backend forced unavailable");
    }

    std::uint64_t h = fnv1a64("mock");
    std::string system;
    std::string user;
    for (const auto& m : messages) {
        h = fnv1a64(role_tag(m.role), h);
        h = fnv1a64(m.content, h);
        if (m.role == Role::System && system.empty()) {
            system = m.content;
        }
        if (m.role == Role::User) {
            user = m.content;  // last user message drives the handlers
        }
    }
    h = fnv1a64("seed=" + (params.seed ? std::to_string(*params.seed) : "none"),
                h);
    h = fnv1a64("temp=" + format_temperature(params.temperature), h);

    const bool cot = system.rfind(prompts::kCotTag, 0) == 0;
    const bool sft = system.rfind(prompts::kSftAnchor, 0) == 0;
    if (cot || sft) {
        ojson envelope;
        if (cot) {
            envelope["mechanism_of_the_api"] = rationale_text(user, fnv1a64("m", h));
        }
        envelope["error"] = "";
        envelope["response"] = simulated_payload(user, h);
        return envelope.dump();
    }
    if (system.find(prompts::kAdherenceAnchor) != std::string::npos) {
        ojson verdict;
        verdict["overall_eval"] = 1;
        verdict["reason"] =
            "The response matches the documented output shape (check " +
            hex8(h) + ").";
        return verdict.dump();
    }
    if (user.find(prompts::kJudgeAnchor) != std::string::npos) {
        return judge_reply(h);
    }
    if (user.find(prompts::kFacAnchor) != std::string::npos) {
        return fac_reply(h);
    }
    if (user.find(prompts::kQueryGenAnchor) != std::string::npos) {
        return generated_query(user, h);
    }
    if (user.find(prompts::kSynthesisAnchor) != std::string::npos) {
        return synthetic_pair(user, h);
    }
    if (user.find(prompts::kRationaleAnchor) != std::string::npos) {
        return rationale_text(user, h);
    }
    if (user.find(prompts::kScenarioRequestAnchor) != std::string::npos ||
        user.find(prompts::kCallWritingAnchor) != std::string::npos) {
        return written_call(user, h);
    }
    if (user.find(prompts::kScenarioAnchor) != std::string::npos) {
        return scenario_text(user, h);
    }
    return "mock completion " + hex8(h);
}

std::string ScriptedChatBackend::chat(const std::vector<ChatMessage>& messages,
                                      const GenerationParams&) {
    std::lock_guard lock(mutex_);
    seen_.push_back(messages);
    if (next_ >= replies_.size()) {
        throw BackendUnavailable("scripted backend: reply queue exhausted");
    }
    return replies_[next_++];
}

std::vector<std::vector<double>> MockEmbedder::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw std::invalid_argument("embed: empty input list");
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::mt19937_64 rng(fnv1a64(text));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> v(kDimension);
        double norm_sq = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            norm_sq += x * x;
        }
        if (norm_sq == 0.0) {
            v[0] = 1.0;
            norm_sq = 1.0;
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& x : v) {
            x *= inv;
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace apisim::backends
