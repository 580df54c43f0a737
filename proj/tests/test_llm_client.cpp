#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <httplib.h>

#include <cstdlib>
#include <thread>
#include <unordered_set>

using namespace crashsev;
using namespace crashsev::testing;

namespace {

ChatPrompt zs_prompt(const std::string& narrative = "A crash happened.", const std::string& id = "R1") {
    return assemble(parse_strategy("ZS"), Narrative{narrative, id, "default"}, {});
}

ModelSpec model(const std::string& id = "m1") {
    ModelSpec m;
    m.model_id = id;
    return m;
}

LlmClient::Sleeper record_sleeps(std::vector<std::uint64_t>& out) {
    return [&out](std::chrono::milliseconds d) { out.push_back(static_cast<std::uint64_t>(d.count())); };
}

MockRule reply(std::string text) {
    MockRule r;
    r.text = std::move(text);
    return r;
}

} // namespace

TEST(Digest, KnownSha256Vector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Digest, DeterministicAndSensitive) {
    const DecodingParams p;
    const auto base = request_digest("m1", zs_prompt(), p);
    EXPECT_EQ(base, request_digest("m1", zs_prompt(), p));
    EXPECT_EQ(base.size(), 64u);
    EXPECT_NE(base, request_digest("m2", zs_prompt(), p));
    EXPECT_NE(base, request_digest("m1", zs_prompt("A crash happened!"), p));
    auto q = p;
    q.top_p = 0.01;
    EXPECT_NE(base, request_digest("m1", zs_prompt(), q));
    q = p;
    q.max_output_tokens = 512;
    EXPECT_NE(base, request_digest("m1", zs_prompt(), q));
}

TEST(Digest, MessageOrderMatters) {
    auto a = zs_prompt();
    auto b = a;
    std::swap(b.messages[0], b.messages[1]);
    EXPECT_NE(request_digest("m", a, {}), request_digest("m", b, {}));
}

TEST(Digest, RecordIdentityDoesNotEnterDigest) {
    // identical wire requests share a cache slot whatever record produced them
    EXPECT_EQ(request_digest("m", zs_prompt("x", "A"), {}), request_digest("m", zs_prompt("x", "B"), {}));
}

TEST(Digest, NoCollisionsAcrossPerturbations) {
    std::unordered_set<std::string> seen;
    for (int i = 0; i < 10000; ++i) {
        auto narrative = "Crash number " + std::to_string(i) + ".";
        ASSERT_TRUE(seen.insert(request_digest("m", zs_prompt(narrative), {})).second) << i;
    }
}

TEST(DecodingParams, DefaultsAndValidation) {
    DecodingParams p;
    EXPECT_EQ(p.temperature, 0.0);
    EXPECT_EQ(p.top_p, 0.0001);
    EXPECT_TRUE(p.deterministic);
    EXPECT_NO_THROW(p.validate());
    EXPECT_THROW(decoding_params_from_json({{"top_p", 0.0}}), Error);
    EXPECT_THROW(decoding_params_from_json({{"temperature", -1.0}}), Error);
    EXPECT_EQ(decoding_params_from_json({{"top_p", 0.01}}).top_p, 0.01);
}

TEST(RequestBody, DoSampleOnlyWhereSupported) {
    auto m = model();
    auto body = request_body(zs_prompt(), m, {});
    EXPECT_FALSE(body.contains("do_sample"));
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["max_tokens"], 1024);
    EXPECT_EQ(deterministic_control(m, {}), "none");
    m.supports_do_sample = true;
    body = request_body(zs_prompt(), m, {});
    EXPECT_EQ(body["do_sample"], false);
    EXPECT_EQ(deterministic_control(m, {}), "do_sample=false");
}

TEST(ModelSpec, TopPOverrideChangesEffectiveParams) {
    auto m = ModelSpec::from_json({{"model_id", "gpt"}, {"top_p", 0.01}});
    EXPECT_EQ(effective_params({}, m).top_p, 0.01);
    EXPECT_THROW(ModelSpec::from_json({{"model_id", ""}}), Error);
}

TEST(RetryPolicy, ExponentialWithCap) {
    RetryPolicy r;
    EXPECT_EQ(r.delay_for(0), 500u);
    EXPECT_EQ(r.delay_for(1), 1000u);
    EXPECT_EQ(r.delay_for(3), 4000u);
    EXPECT_EQ(r.delay_for(10), 8000u);
}

TEST(LlmClient, ScriptedReplyAndLatency) {
    MockBackend mock;
    auto rule = reply("Fatal accident");
    rule.latency_ms = 42;
    mock.set_default(rule);
    LlmClient client(mock);
    auto r = client.complete(zs_prompt(), model(), {});
    EXPECT_EQ(r.text, "Fatal accident");
    EXPECT_EQ(r.latency_ms, 42u);
    EXPECT_EQ(r.attempts, 1u);
    EXPECT_FALSE(r.cached);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(LlmClient, TransientFailuresRetriedThenSucceed) {
    MockBackend mock;
    auto rule = reply("Minor or non-injury accident");
    rule.fail_times = 2;
    mock.set_default(rule);
    std::vector<std::uint64_t> sleeps;
    LlmClient client(mock, {}, 4, record_sleeps(sleeps));
    auto r = client.complete(zs_prompt(), model(), {});
    EXPECT_EQ(r.attempts, 3u);
    EXPECT_EQ(mock.calls_for(r.request_digest), 3u);
    EXPECT_EQ(sleeps, (std::vector<std::uint64_t>{500, 1000}));
}

TEST(LlmClient, RetriesExhausted) {
    MockBackend mock;
    auto rule = reply("x");
    rule.fail_times = 10;
    rule.fail_with = ErrorCode::RateLimited;
    mock.set_default(rule);
    std::vector<std::uint64_t> sleeps;
    LlmClient client(mock, {}, 4, record_sleeps(sleeps));
    try {
        client.complete(zs_prompt(), model(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RateLimited);
    }
    EXPECT_EQ(mock.calls(), 4u); // one try plus three retries
    EXPECT_EQ(sleeps.size(), 3u);
}

TEST(LlmClient, AuthErrorNotRetried) {
    MockBackend mock;
    auto rule = reply("x");
    rule.fail_times = 1;
    rule.fail_with = ErrorCode::AuthError;
    mock.set_default(rule);
    LlmClient client(mock, {}, 4, [](auto) {});
    EXPECT_THROW(client.complete(zs_prompt(), model(), {}), Error);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(LlmClient, TruncatedAnswerSurfaces) {
    MockBackend mock;
    auto rule = reply("Think step by step: the");
    rule.finish_reason = "length";
    mock.set_default(rule);
    LlmClient client(mock, {}, 4, [](auto) {});
    try {
        client.complete(zs_prompt(), model(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Truncated);
    }
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(LlmClient, WarmCacheMakesNoCalls) {
    MockBackend mock;
    mock.set_default(reply("Serious injury accident"));
    LlmClient client(mock);
    ResponseCache cache;
    auto first = client.cached_complete(zs_prompt(), model(), {}, cache);
    auto second = client.cached_complete(zs_prompt(), model(), {}, cache);
    EXPECT_EQ(mock.calls(), 1u);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(second.attempts, 0u);
    EXPECT_EQ(second.text, first.text);
    EXPECT_EQ(second.request_digest, first.request_digest);
}

TEST(LlmClient, FailuresAreNotCached) {
    MockBackend mock;
    auto rule = reply("x");
    rule.fail_times = 1;
    rule.fail_with = ErrorCode::AuthError;
    mock.set_default(rule);
    LlmClient client(mock);
    ResponseCache cache;
    EXPECT_THROW(client.cached_complete(zs_prompt(), model(), {}, cache), Error);
    EXPECT_EQ(cache.size(), 0u);
}

TEST(LlmClient, ConcurrentCallsRespectLimit) {
    struct Probe : ChatBackend {
        std::atomic<int> now{0}, peak{0};
        std::atomic<std::uint64_t> n{0};
        BackendReply send(const CompletionRequest&) override {
            ++n;
            int v = ++now;
            int p = peak.load();
            while (v > p && !peak.compare_exchange_weak(p, v)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --now;
            return {"ok", "stop", 0};
        }
        std::uint64_t calls() const override { return n; }
    } probe;
    LlmClient client(probe, {}, 2);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] { client.complete(zs_prompt(std::to_string(i)), model(), {}); });
    threads.clear();
    EXPECT_EQ(probe.n.load(), 8u);
    EXPECT_LE(probe.peak.load(), 2);
}

TEST(ResponseCache, PersistsAsJsonLines) {
    auto dir = scratch_dir("cache_persist");
    auto path = (dir / "cache.jsonl").string();
    MockBackend mock;
    mock.set_default(reply("Fatal accident"));
    LlmClient client(mock);
    {
        ResponseCache cache(path);
        client.cached_complete(zs_prompt(), model(), {}, cache);
    }
    auto line = slurp(path);
    auto j = nlohmann::json::parse(line.substr(0, line.find('\n')));
    for (auto key : {"digest", "model_id", "params", "messages", "response_text", "timestamp"}) EXPECT_TRUE(j.contains(key)) << key;

    ResponseCache reloaded(path);
    EXPECT_EQ(reloaded.size(), 1u);
    auto again = client.cached_complete(zs_prompt(), model(), {}, reloaded);
    EXPECT_TRUE(again.cached);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(ResponseCache, CorruptLineIsReported) {
    auto dir = scratch_dir("cache_corrupt");
    auto path = dir / "cache.jsonl";
    std::ofstream(path) << "{\"digest\": \"abc\", \"model_id\": \"m\"\n";
    try {
        ResponseCache cache(path.string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CacheCorrupt);
    }
}

TEST(MockBackend, ScriptMatchersAndLabels) {
    auto mock = MockBackend::from_json(nlohmann::json::parse(R"({
        "rules": [
            {"record_id": "R1", "strategy": "ZS_PE", "label": "Fatal", "reasoning": "High speed."},
            {"contains": "wet", "text": "Minor or non-injury accident"}
        ],
        "default": {"label": "SeriousInjury"}
    })"));
    LlmClient client(mock);
    auto pe = assemble(parse_strategy("ZS_PE"), Narrative{"x", "R1", "default"}, {});
    EXPECT_EQ(client.complete(pe, model(), {}).text, "High speed. Serious accident with potentially fatal outcomes");
    EXPECT_EQ(client.complete(zs_prompt("A wet road.", "R1"), model(), {}).text, "Minor or non-injury accident");
    EXPECT_EQ(client.complete(zs_prompt("dry", "R9"), model(), {}).text, "Serious injury accident");
}

TEST(MockBackend, UnscriptedRequestIsTransportError) {
    MockBackend mock;
    LlmClient client(mock, {.max_retries = 0});
    EXPECT_THROW(client.complete(zs_prompt(), model(), {}), Error);
}

TEST(Http, StatusClassification) {
    EXPECT_EQ(classify_status(200), std::nullopt);
    EXPECT_EQ(classify_status(401), ErrorCode::AuthError);
    EXPECT_EQ(classify_status(403), ErrorCode::AuthError);
    EXPECT_EQ(classify_status(429), ErrorCode::RateLimited);
    EXPECT_EQ(classify_status(500), ErrorCode::Transport);
}

TEST(Http, CompletionBodyParsing) {
    auto r = parse_completion_body(R"({"choices":[{"message":{"role":"assistant","content":"Fatal accident"},"finish_reason":"length"}]})");
    EXPECT_EQ(r.text, "Fatal accident");
    EXPECT_EQ(r.finish_reason, "length");
    EXPECT_THROW(parse_completion_body("{}"), Error);
    EXPECT_THROW(parse_completion_body("not json"), Error);
}

TEST(Http, SplitUrl) {
    auto u = split_url("https://api.example.com:8443/v1/chat/completions");
    EXPECT_EQ(u.origin, "https://api.example.com:8443");
    EXPECT_EQ(u.path, "/v1/chat/completions");
    EXPECT_THROW(split_url("api.example.com"), Error);
}

TEST(Http, LocalServerRoundTrip) {
    httplib::Server server;
    nlohmann::json seen;
    std::string auth;
    int status = 200;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.status = status;
        res.set_content(R"({"choices":[{"message":{"content":"Serious injury accident"},"finish_reason":"stop"}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::jthread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("CRASHSEV_TEST_KEY", "sekrit", 1);
    auto m = ModelSpec::from_json({{"model_id", "local"},
                                   {"endpoint_url", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"},
                                   {"auth_ref", "CRASHSEV_TEST_KEY"},
                                   {"supports_do_sample", true}});
    HttpBackend backend(std::chrono::seconds(5));
    LlmClient client(backend, {.max_retries = 0});
    auto r = client.complete(zs_prompt(), m, {});
    EXPECT_EQ(r.text, "Serious injury accident");
    EXPECT_EQ(auth, "Bearer sekrit");
    EXPECT_EQ(seen["model"], "local");
    EXPECT_EQ(seen["do_sample"], false);

    status = 401;
    try {
        client.complete(zs_prompt(), m, {});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AuthError);
    }

    ::unsetenv("CRASHSEV_TEST_KEY");
    EXPECT_THROW(client.complete(zs_prompt(), m, {}), Error);
    server.stop();
}
