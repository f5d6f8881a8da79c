#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "apisim/core.hpp"

namespace apisim::backends {

// Retries exhausted or transport-level failure.
struct BackendUnavailable : Error {
    using Error::Error;
};

// Auth or other 4xx refusal; never retried.
struct BackendRefused : Error {
    using Error::Error;
};

enum class Role { System, User, Assistant };

struct ChatMessage {
    Role role;
    std::string content;
};

struct GenerationParams {
    double temperature = 0.0;  // [0, 2]
    std::optional<std::int64_t> seed;
    int max_tokens = 4096;
};

struct BackendConfig {
    std::string endpoint_url;
    std::string model_id;
    std::string api_key_env_var;
    std::optional<std::string> api_key;  // file placeholder; the env var wins
    std::chrono::milliseconds request_timeout{30000};
    int max_attempts = 3;
    int max_in_flight = 8;
    std::chrono::milliseconds backoff_base{1000};
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    /// Returns the completion text verbatim. Throws BackendUnavailable after
    /// exhausting retries and BackendRefused on auth failures.
    virtual std::string chat(const std::vector<ChatMessage>& messages,
                             const GenerationParams& params) = 0;

    virtual bool healthy() { return true; }
};

class Embedder {
public:
    virtual ~Embedder() = default;

    /// One vector per input text, all of equal dimension. Throws
    /// std::invalid_argument on an empty input list.
    virtual std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) = 0;

    virtual std::size_t dimension() const = 0;
};

/// Caps the number of calls in flight at max_in_flight.
class BoundedGate {
public:
    explicit BoundedGate(int capacity);

    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable available_;
    int slots_;
};

struct HttpResult {
    int status = 0;  // 0 means the transport itself failed
    std::string body;
    std::string detail;  // transport failure reason when status == 0
};

using Header = std::pair<std::string, std::string>;

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& url, const std::vector<Header>& headers,
                            const std::string& body,
                            std::chrono::milliseconds timeout) = 0;
    virtual HttpResult get(const std::string& url,
                           std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport.
std::unique_ptr<HttpTransport> make_default_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Chat-completions-style JSON client: system/user messages in, completion
/// text out. Transient failures (transport errors, 429, 5xx) are retried up
/// to max_attempts with exponential backoff and full jitter; 4xx refusals
/// are not retried. A configured-but-missing API key refuses before any
/// network call.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config,
                             std::unique_ptr<HttpTransport> transport = nullptr,
                             Sleeper sleeper = {});

    std::string chat(const std::vector<ChatMessage>& messages,
                     const GenerationParams& params) override;
    bool healthy() override;

private:
    std::string resolve_api_key() const;

    BackendConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    BoundedGate gate_;
};

/// Chat-completions-style embedding client over the same transport contract.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(BackendConfig config,
                          std::unique_ptr<HttpTransport> transport = nullptr,
                          Sleeper sleeper = {});

    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }

private:
    BackendConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    BoundedGate gate_;
    std::size_t dimension_ = 0;
};

/// Deterministic stand-in for every chat role. Recognizes the pipeline's
/// prompt families by their anchor lines and answers with schema-valid text
/// derived only from the messages and the generation params, so identical
/// inputs always yield identical outputs. Instrumented for tests.
class MockChatBackend : public ChatBackend {
public:
    MockChatBackend() = default;

    std::string chat(const std::vector<ChatMessage>& messages,
                     const GenerationParams& params) override;
    bool healthy() override { return healthy_; }

    void set_healthy(bool value) { healthy_ = value; }
    /// When set, chat() throws BackendUnavailable without producing output.
    void set_unavailable(bool value) { unavailable_ = value; }

    std::size_t calls() const { return calls_.load(); }
    int max_concurrency() const { return max_concurrency_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_concurrency_{0};
    bool healthy_ = true;
    std::atomic<bool> unavailable_{false};
};

/// Replays a fixed queue of canned completions; throws BackendUnavailable
/// when the queue runs dry. For unit tests that need exact outputs.
class ScriptedChatBackend : public ChatBackend {
public:
    explicit ScriptedChatBackend(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}

    std::string chat(const std::vector<ChatMessage>& messages,
                     const GenerationParams& params) override;

    std::size_t calls() const { return next_; }
    const std::vector<std::vector<ChatMessage>>& seen() const { return seen_; }

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    std::vector<std::vector<ChatMessage>> seen_;
    std::mutex mutex_;
};

/// Deterministic hash-to-vector embedder: dimension 64, unit norm.
class MockEmbedder : public Embedder {
public:
    static constexpr std::size_t kDimension = 64;

    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return kDimension; }
};

/// FNV-1a, the deterministic seed for everything mock-generated.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 1469598103934665603ull);

}  // namespace apisim::backends
