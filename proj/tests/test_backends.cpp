#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "apisim/backends.hpp"
#include "apisim/prompts.hpp"
#include "doctest.h"

using namespace apisim;
using namespace apisim::backends;

namespace {

// Records every POST and replays a scripted list of results.
class FakeTransport : public HttpTransport {
public:
    explicit FakeTransport(std::vector<HttpResult> results)
        : results_(std::move(results)) {}

    HttpResult post(const std::string& url, const std::vector<Header>& headers,
                    const std::string& body,
                    std::chrono::milliseconds) override {
        posts.push_back({url, headers, body});
        if (next_ < results_.size()) {
            return results_[next_++];
        }
        return results_.empty() ? HttpResult{} : results_.back();
    }

    HttpResult get(const std::string& url, std::chrono::milliseconds) override {
        gets.push_back(url);
        return {200, "{}", ""};
    }

    struct Post {
        std::string url;
        std::vector<Header> headers;
        std::string body;
    };
    std::vector<Post> posts;
    std::vector<std::string> gets;

private:
    std::vector<HttpResult> results_;
    std::size_t next_ = 0;
};

std::string completion(const std::string& text) {
    ojson payload;
    payload["choices"] = ojson::array(
        {ojson{{"message", ojson{{"content", text}}}}});
    return payload.dump();
}

std::vector<ChatMessage> simple_messages() {
    return {{Role::System, "be terse"}, {Role::User, "hello"}};
}

BackendConfig test_config() {
    BackendConfig config;
    config.endpoint_url = "http://mock.invalid/v1";
    config.model_id = "test-model";
    config.max_attempts = 3;
    config.backoff_base = std::chrono::milliseconds{1};
    return config;
}

}  // namespace

TEST_CASE("mock chat is deterministic and seed-sensitive") {
    MockChatBackend mock;
    GenerationParams params;
    params.seed = 42;
    const std::string a = mock.chat(simple_messages(), params);
    const std::string b = mock.chat(simple_messages(), params);
    CHECK(a == b);
    params.seed = 43;
    const std::string c = mock.chat(simple_messages(), params);
    CHECK(a != c);
    CHECK(mock.calls() == 3);
    CHECK(mock.healthy());
    mock.set_unavailable(true);
    CHECK_THROWS_AS(mock.chat(simple_messages(), params), BackendUnavailable);
}

TEST_CASE("scripted chat replays in order then runs dry") {
    ScriptedChatBackend scripted({"one", "two"});
    GenerationParams params;
    CHECK(scripted.chat(simple_messages(), params) == "one");
    CHECK(scripted.chat(simple_messages(), params) == "two");
    CHECK_THROWS_AS(scripted.chat(simple_messages(), params),
                    BackendUnavailable);
    // The dry call is still recorded for inspection.
    CHECK(scripted.seen().size() == 3);
    CHECK(scripted.seen()[0][1].content == "hello");
}

TEST_CASE("http chat retries transient failures up to max_attempts") {
    auto transport = std::make_unique<FakeTransport>(std::vector<HttpResult>{
        {0, "", "connect refused"},
        {503, "overloaded", ""},
        {200, completion("finally"), ""},
    });
    auto* raw = transport.get();
    HttpChatBackend backend(test_config(), std::move(transport),
                            [](std::chrono::milliseconds) {});
    GenerationParams params;
    CHECK(backend.chat(simple_messages(), params) == "finally");
    CHECK(raw->posts.size() == 3);
    CHECK(raw->posts[0].url == "http://mock.invalid/v1/chat/completions");
}

TEST_CASE("http chat gives up after max_attempts transient failures") {
    auto transport = std::make_unique<FakeTransport>(std::vector<HttpResult>{
        {500, "a", ""}, {502, "b", ""}, {429, "c", ""}, {200, "late", ""}});
    auto* raw = transport.get();
    HttpChatBackend backend(test_config(), std::move(transport),
                            [](std::chrono::milliseconds) {});
    GenerationParams params;
    CHECK_THROWS_AS(backend.chat(simple_messages(), params),
                    BackendUnavailable);
    CHECK(raw->posts.size() == 3);
}

TEST_CASE("http chat refuses non-transient statuses without retrying") {
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResult>{{400, "bad request", ""}});
    auto* raw = transport.get();
    HttpChatBackend backend(test_config(), std::move(transport),
                            [](std::chrono::milliseconds) {});
    GenerationParams params;
    CHECK_THROWS_AS(backend.chat(simple_messages(), params), BackendRefused);
    CHECK(raw->posts.size() == 1);
}

TEST_CASE("missing api key refuses before any network call") {
    BackendConfig config = test_config();
    config.api_key_env_var = "APISIM_TEST_KEY_THAT_IS_NOT_SET";
    auto transport = std::make_unique<FakeTransport>(std::vector<HttpResult>{});
    auto* raw = transport.get();
    HttpChatBackend backend(config, std::move(transport),
                            [](std::chrono::milliseconds) {});
    GenerationParams params;
    CHECK_THROWS_AS(backend.chat(simple_messages(), params), BackendRefused);
    CHECK(raw->posts.empty());
}

TEST_CASE("configured api key rides the Authorization header") {
    BackendConfig config = test_config();
    config.api_key = "sk-test";
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResult>{{200, completion("ok"), ""}});
    auto* raw = transport.get();
    HttpChatBackend backend(config, std::move(transport),
                            [](std::chrono::milliseconds) {});
    GenerationParams params;
    CHECK(backend.chat(simple_messages(), params) == "ok");
    REQUIRE(raw->posts.size() == 1);
    bool found = false;
    for (const auto& [name, value] : raw->posts[0].headers) {
        if (name == "Authorization" && value == "Bearer sk-test") {
            found = true;
        }
    }
    CHECK(found);
    // The request body carries the messages and sampling params.
    const json body = json::parse(raw->posts[0].body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"].size() == 2);
}

TEST_CASE("mock embedder: unit norm, fixed dimension, deterministic") {
    MockEmbedder embedder;
    CHECK(embedder.dimension() == 64);
    CHECK_THROWS_AS(embedder.embed({}), std::invalid_argument);
    const auto vectors = embedder.embed({"alpha", "beta", "alpha"});
    REQUIRE(vectors.size() == 3);
    for (const auto& v : vectors) {
        REQUIRE(v.size() == 64);
        double norm = 0.0;
        for (const double x : v) {
            norm += x * x;
        }
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
    }
    CHECK(vectors[0] == vectors[2]);
    CHECK(vectors[0] != vectors[1]);
}

TEST_CASE("bounded gate caps concurrency") {
    BoundedGate gate(4);
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    std::vector<std::thread> threads;
    threads.reserve(16);
    for (int i = 0; i < 16; ++i) {
        threads.emplace_back([&] {
            gate.acquire();
            const int now = ++active;
            int seen = peak.load();
            while (now > seen && !peak.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds{2});
            --active;
            gate.release();
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    CHECK(peak.load() <= 4);
    CHECK(peak.load() >= 1);
}

TEST_CASE("fnv1a64 is stable and seed-chained") {
    const std::uint64_t a = fnv1a64("abc");
    CHECK(a == fnv1a64("abc"));
    CHECK(a != fnv1a64("abd"));
    CHECK(fnv1a64("abc", 1) != a);
    CHECK(fnv1a64("", 99) == 99);
}
