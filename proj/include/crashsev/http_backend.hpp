#pragma once

#include "crashsev/llm_client.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

namespace crashsev {

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint url lacks a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// Maps an HTTP status to the client error taxonomy; nullopt for success.
inline std::optional<ErrorCode> classify_status(int status) {
    if (status >= 200 && status < 300) return std::nullopt;
    if (status == 401 || status == 403) return ErrorCode::AuthError;
    if (status == 429) return ErrorCode::RateLimited;
    return ErrorCode::Transport;
}

/// Extracts text and finish reason from a chat-completion response body.
inline BackendReply parse_completion_body(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Transport, std::string("response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw Error(ErrorCode::Transport, "response has no choices");
    const auto& choice = j["choices"][0];
    BackendReply reply;
    const auto& content = choice.contains("message") ? choice["message"].value("content", nlohmann::json()) : nlohmann::json();
    if (!content.is_string()) throw Error(ErrorCode::Transport, "response choice has no message content");
    reply.text = content.get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
        reply.finish_reason = choice["finish_reason"].get<std::string>();
    return reply;
}

/// OpenAI-compatible chat-completions endpoint over HTTP(S).
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}

    BackendReply send(const CompletionRequest& req) override {
        ++calls_;
        const auto url = split_url(req.model.endpoint_url);
        httplib::Headers headers;
        if (!req.model.auth_ref.empty()) {
            const char* key = std::getenv(req.model.auth_ref.c_str());
            if (!key || !*key) throw Error(ErrorCode::AuthError, "environment variable " + req.model.auth_ref + " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        httplib::Client cli(url.origin);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_).count());
        cli.set_read_timeout(timeout_.count());
        cli.set_write_timeout(timeout_.count());

        const auto started = std::chrono::steady_clock::now();
        auto res = cli.Post(url.path, headers, request_body(req.prompt, req.model, req.params).dump(), "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

        if (!res) throw Error(ErrorCode::Transport, "request failed: " + httplib::to_string(res.error()));
        if (auto code = classify_status(res->status))
            throw Error(*code, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
        auto reply = parse_completion_body(res->body);
        reply.latency_ms = static_cast<std::uint64_t>(elapsed.count());
        return reply;
    }

    std::uint64_t calls() const override { return calls_.load(); }

private:
    std::chrono::seconds timeout_;
    std::atomic<std::uint64_t> calls_{0};
};

} // namespace crashsev
