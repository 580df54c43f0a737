#pragma once

#include "crashsev/llm_client.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace crashsev {

/// One scripted behaviour. All present matchers must hold; the first matching
/// rule answers. A reply is either literal text or a class label rendered in
/// the label set of the prompt's strategy, optionally preceded by reasoning.
struct MockRule {
    std::optional<std::string> record_id;
    std::optional<std::string> strategy;
    std::optional<std::string> model_id;
    std::optional<std::string> digest;
    std::optional<std::string> contains;

    std::optional<std::string> text;
    std::optional<SeverityClass> label;
    std::string reasoning;
    std::string finish_reason = "stop";
    std::uint64_t latency_ms = 0;

    std::uint32_t fail_times = 0; // per distinct request
    ErrorCode fail_with = ErrorCode::Transport;

    bool matches(const CompletionRequest& req) const {
        if (record_id && *record_id != req.prompt.subject_record_id) return false;
        if (strategy && *strategy != req.prompt.strategy.name()) return false;
        if (model_id && *model_id != req.model.model_id) return false;
        if (digest && *digest != req.digest) return false;
        if (contains) {
            bool found = false;
            for (const auto& m : req.prompt.messages) found = found || m.content.find(*contains) != std::string::npos;
            if (!found) return false;
        }
        return true;
    }

    std::string render(const CompletionRequest& req) const {
        if (text) return *text;
        if (!label) return {};
        auto answer = label_set(req.prompt.strategy.pe).display(*label);
        return reasoning.empty() ? answer : reasoning + ' ' + answer;
    }

    static MockRule from_json(const nlohmann::json& j) {
        MockRule r;
        auto opt = [&](const char* key, std::optional<std::string>& out) {
            if (j.contains(key)) out = j[key].get<std::string>();
        };
        opt("record_id", r.record_id);
        opt("strategy", r.strategy);
        opt("model_id", r.model_id);
        opt("digest", r.digest);
        opt("contains", r.contains);
        opt("text", r.text);
        if (j.contains("label")) {
            auto c = parse_severity_class(j["label"].get<std::string>());
            if (!c) throw Error(ErrorCode::InvalidConfig, "mock rule has unknown label " + j["label"].dump());
            r.label = *c;
        }
        r.reasoning = j.value("reasoning", "");
        r.finish_reason = j.value("finish_reason", "stop");
        r.latency_ms = j.value("latency_ms", std::uint64_t{0});
        if (j.contains("fail")) {
            const auto& f = j["fail"];
            r.fail_times = f.value("times", 1u);
            auto name = f.value("error", "Transport");
            if (name == "AuthError") r.fail_with = ErrorCode::AuthError;
            else if (name == "RateLimited") r.fail_with = ErrorCode::RateLimited;
            else if (name == "Transport") r.fail_with = ErrorCode::Transport;
            else throw Error(ErrorCode::InvalidConfig, "mock failure must be AuthError, RateLimited or Transport");
        }
        return r;
    }
};

/// Scriptable in-process backend. Script file format:
///   {"rules": [ {matchers..., reply...}, ... ], "default": {reply...}}
class MockBackend : public ChatBackend {
public:
    MockBackend() = default;

    static MockBackend from_json(const nlohmann::json& j) {
        MockBackend m;
        for (const auto& r : j.value("rules", nlohmann::json::array())) m.add_rule(MockRule::from_json(r));
        if (j.contains("default")) m.set_default(MockRule::from_json(j["default"]));
        return m;
    }

    MockBackend(MockBackend&& other) noexcept : rules_(std::move(other.rules_)), fallback_(std::move(other.fallback_)) {}

    MockBackend& add_rule(MockRule rule) {
        std::lock_guard lock(mutex_);
        rules_.push_back(std::move(rule));
        return *this;
    }
    MockBackend& set_default(MockRule rule) {
        std::lock_guard lock(mutex_);
        fallback_ = std::move(rule);
        return *this;
    }

    BackendReply send(const CompletionRequest& req) override {
        std::lock_guard lock(mutex_);
        ++calls_;
        ++per_digest_[req.digest];
        const MockRule* rule = nullptr;
        for (const auto& r : rules_)
            if (r.matches(req)) {
                rule = &r;
                break;
            }
        if (!rule && fallback_) rule = &*fallback_;
        if (!rule) throw Error(ErrorCode::Transport, "mock has no script for record " + req.prompt.subject_record_id);

        if (per_digest_[req.digest] <= rule->fail_times)
            throw Error(rule->fail_with, "scripted failure " + std::to_string(per_digest_[req.digest]));
        return {rule->render(req), rule->finish_reason, rule->latency_ms};
    }

    std::uint64_t calls() const override {
        std::lock_guard lock(mutex_);
        return calls_;
    }

    /// Attempts seen for one request digest.
    std::uint64_t calls_for(const std::string& digest) const {
        std::lock_guard lock(mutex_);
        auto it = per_digest_.find(digest);
        return it == per_digest_.end() ? 0 : it->second;
    }

private:
    mutable std::mutex mutex_;
    std::vector<MockRule> rules_;
    std::optional<MockRule> fallback_;
    std::uint64_t calls_ = 0;
    std::map<std::string, std::uint64_t> per_digest_;
};

} // namespace crashsev
