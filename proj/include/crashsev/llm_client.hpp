#pragma once

#include "crashsev/digest.hpp"
#include "crashsev/error.hpp"
#include "crashsev/prompting.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace crashsev {

/// Greedy decoding by default: temperature 0, top_p 0.0001, no sampling.
struct DecodingParams {
    double temperature = 0.0;
    double top_p = 0.0001;
    bool deterministic = true;
    std::uint32_t max_output_tokens = 1024;

    void validate() const {
        if (!(temperature >= 0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
        if (!(top_p > 0 && top_p <= 1)) throw Error(ErrorCode::InvalidConfig, "top_p must be in (0, 1]");
        if (max_output_tokens == 0) throw Error(ErrorCode::InvalidConfig, "max_output_tokens must be positive");
    }

    friend bool operator==(const DecodingParams&, const DecodingParams&) = default;
};

inline nlohmann::json to_json(const DecodingParams& p) {
    return {{"temperature", p.temperature},
            {"top_p", p.top_p},
            {"deterministic", p.deterministic},
            {"max_output_tokens", p.max_output_tokens}};
}

inline DecodingParams decoding_params_from_json(const nlohmann::json& j, DecodingParams p = {}) {
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.deterministic = j.value("deterministic", p.deterministic);
    p.max_output_tokens = j.value("max_output_tokens", p.max_output_tokens);
    p.validate();
    return p;
}

struct ModelSpec {
    std::string model_id;
    std::string endpoint_url; // full chat-completions URL
    std::string auth_ref;     // environment variable holding the API key; empty for none
    std::optional<double> top_p; // per-model override
    bool supports_do_sample = false; // endpoint accepts "do_sample"

    static ModelSpec from_json(const nlohmann::json& j) {
        ModelSpec m;
        m.model_id = j.at("model_id").get<std::string>();
        if (m.model_id.empty()) throw Error(ErrorCode::InvalidConfig, "model_id must be non-empty");
        m.endpoint_url = j.value("endpoint_url", "");
        m.auth_ref = j.value("auth_ref", "");
        if (j.contains("top_p")) m.top_p = j["top_p"].get<double>();
        m.supports_do_sample = j.value("supports_do_sample", false);
        return m;
    }
};

/// Params as sent to a given model, after its overrides.
inline DecodingParams effective_params(const DecodingParams& params, const ModelSpec& model) {
    auto p = params;
    if (model.top_p) p.top_p = *model.top_p;
    return p;
}

inline nlohmann::json messages_json(const ChatPrompt& prompt) {
    auto arr = nlohmann::json::array();
    for (const auto& m : prompt.messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return arr;
}

/// Content address of a request: SHA-256 over a canonical JSON encoding.
inline std::string request_digest(std::string_view model_id, const ChatPrompt& prompt, const DecodingParams& params) {
    nlohmann::json canonical = {{"model_id", model_id}, {"messages", messages_json(prompt)}, {"params", to_json(params)}};
    return sha256_hex(canonical.dump());
}

/// Chat-completion request body in the OpenAI wire format.
inline nlohmann::json request_body(const ChatPrompt& prompt, const ModelSpec& model, const DecodingParams& params) {
    nlohmann::json body = {{"model", model.model_id},
                           {"messages", messages_json(prompt)},
                           {"temperature", params.temperature},
                           {"top_p", params.top_p},
                           {"max_tokens", params.max_output_tokens}};
    if (params.deterministic && model.supports_do_sample) body["do_sample"] = false;
    return body;
}

/// How the deterministic flag reached the endpoint, for transcripts.
inline std::string deterministic_control(const ModelSpec& model, const DecodingParams& params) {
    if (!params.deterministic) return "off";
    return model.supports_do_sample ? "do_sample=false" : "none";
}

struct LLMResponse {
    std::string text;
    std::string model_id;
    bool cached = false;
    std::uint64_t latency_ms = 0;
    std::string request_digest;
    std::uint32_t attempts = 0;
};

struct CompletionRequest {
    const ChatPrompt& prompt;
    const ModelSpec& model;
    const DecodingParams& params;
    std::string digest;
};

struct BackendReply {
    std::string text;
    std::string finish_reason = "stop";
    std::uint64_t latency_ms = 0;
};

/// Transport to a model. send() throws Error with AuthError, RateLimited or
/// Transport on failure and must be safe to call concurrently.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual BackendReply send(const CompletionRequest& request) = 0;
    /// Number of send() invocations so far, failed ones included.
    virtual std::uint64_t calls() const = 0;
};

struct RetryPolicy {
    std::uint32_t max_retries = 3;
    std::uint64_t base_delay_ms = 500;
    std::uint64_t max_delay_ms = 8000;

    std::uint64_t delay_for(std::uint32_t retry) const {
        std::uint64_t d = base_delay_ms;
        for (std::uint32_t i = 0; i < retry && d < max_delay_ms; ++i) d *= 2;
        return std::min(d, max_delay_ms);
    }

    static RetryPolicy from_json(const nlohmann::json& j) {
        RetryPolicy r;
        r.max_retries = j.value("max_retries", r.max_retries);
        r.base_delay_ms = j.value("base_delay_ms", r.base_delay_ms);
        r.max_delay_ms = j.value("max_delay_ms", r.max_delay_ms);
        return r;
    }
};

inline bool is_transient(ErrorCode code) { return code == ErrorCode::Transport || code == ErrorCode::RateLimited; }

struct CacheEntry {
    std::string digest;
    std::string model_id;
    nlohmann::json params;
    nlohmann::json messages;
    std::string response_text;
    std::string timestamp;
};

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only JSON-lines response store keyed by request digest. Readers
/// run concurrently; appends are serialized and flushed line by line.
class ResponseCache {
public:
    /// In-memory only.
    ResponseCache() = default;

    /// Loads an existing file (if any). An undecodable line throws
    /// CacheCorrupt; the file is never rewritten.
    explicit ResponseCache(std::string path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (line.empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                CacheEntry e{j.at("digest").get<std::string>(),   j.at("model_id").get<std::string>(),
                             j.at("params"),                      j.at("messages"),
                             j.at("response_text").get<std::string>(), j.value("timestamp", "")};
                entries_[e.digest] = std::move(e);
            } catch (const nlohmann::json::exception& ex) {
                throw Error(ErrorCode::CacheCorrupt, path_ + " line " + std::to_string(line_no) + ": " + ex.what());
            }
        }
    }

    std::optional<CacheEntry> lookup(const std::string& digest) const {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(digest); it != entries_.end()) return it->second;
        return std::nullopt;
    }

    void store(CacheEntry entry) {
        std::unique_lock lock(mutex_);
        if (entries_.count(entry.digest)) return;
        if (!path_.empty()) {
            nlohmann::json j = {{"digest", entry.digest},       {"model_id", entry.model_id},
                                {"params", entry.params},       {"messages", entry.messages},
                                {"response_text", entry.response_text}, {"timestamp", entry.timestamp}};
            std::ofstream out(path_, std::ios::app);
            if (!out) throw Error(ErrorCode::Io, "cannot append to cache " + path_);
            out << j.dump() + '\n';
            out.flush();
        }
        entries_[entry.digest] = std::move(entry);
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

private:
    std::string path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, CacheEntry> entries_;
};

/// Caps the number of concurrent holders.
class InFlightLimit {
public:
    explicit InFlightLimit(std::size_t limit) : free_(std::max<std::size_t>(1, limit)) {}

    class Slot {
    public:
        explicit Slot(InFlightLimit& l) : l_(l) { l_.acquire(); }
        ~Slot() { l_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        InFlightLimit& l_;
    };

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return free_ > 0; });
        --free_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++free_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t free_;
};

class LlmClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit LlmClient(ChatBackend& backend, RetryPolicy retry = {}, std::size_t max_in_flight = 4,
                       Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
        : backend_(backend), retry_(retry), limit_(max_in_flight), sleep_(std::move(sleeper)) {}

    /// Sends the prompt, retrying transient failures with exponential backoff.
    /// Authentication failures and truncated answers are never retried.
    LLMResponse complete(const ChatPrompt& prompt, const ModelSpec& model, const DecodingParams& params) {
        const auto p = effective_params(params, model);
        CompletionRequest req{prompt, model, p, request_digest(model.model_id, prompt, p)};
        for (std::uint32_t attempt = 1;; ++attempt) {
            try {
                BackendReply reply;
                {
                    InFlightLimit::Slot slot(limit_);
                    reply = backend_.send(req);
                }
                if (reply.finish_reason == "length")
                    throw Error(ErrorCode::Truncated, "response hit the max_output_tokens cap");
                return {std::move(reply.text), model.model_id, false, reply.latency_ms, req.digest, attempt};
            } catch (const Error& e) {
                if (!is_transient(e.code()) || attempt > retry_.max_retries) throw;
                sleep_(std::chrono::milliseconds(retry_.delay_for(attempt - 1)));
            }
        }
    }

    /// Serves from the cache when possible; stores successful answers only.
    LLMResponse cached_complete(const ChatPrompt& prompt, const ModelSpec& model, const DecodingParams& params,
                                ResponseCache& cache) {
        const auto p = effective_params(params, model);
        const auto digest = request_digest(model.model_id, prompt, p);
        if (auto hit = cache.lookup(digest)) return {hit->response_text, model.model_id, true, 0, digest, 0};
        auto response = complete(prompt, model, params);
        cache.store({digest, model.model_id, to_json(p), messages_json(prompt), response.text, utc_timestamp()});
        return response;
    }

    ChatBackend& backend() noexcept { return backend_; }

private:
    ChatBackend& backend_;
    RetryPolicy retry_;
    InFlightLimit limit_;
    Sleeper sleep_;
};

} // namespace crashsev
