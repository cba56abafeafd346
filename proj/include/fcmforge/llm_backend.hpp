#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fcmforge {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::string task;     // "extract" | "consolidate"; selects the fixture subdirectory
    std::string payload;  // the content the reply depends on; fixtures are keyed by its SHA-256
    std::vector<ChatMessage> messages;
    std::size_t attempt = 0;  // 0 for the first try, then one per repair round
};

struct ChatResponse {
    std::string content;
    std::string request_body;   // wire request as sent (no credentials)
    std::string response_body;  // wire response as received
};

/// Throws BackendError on transport failure or when no reply is available.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) const = 0;
    virtual std::string describe() const = 0;
};

/// Replies from `<dir>/<task>/<sha256(payload)>.json`; repair round r first tries
/// `<sha>.retry<r>.json`. Pure and thread-safe.
class FixtureBackend final : public LlmBackend {
public:
    explicit FixtureBackend(std::filesystem::path dir);
    ChatResponse complete(const ChatRequest& request) const override;
    std::string describe() const override;

    static std::string fixture_key(const std::string& payload);

private:
    std::filesystem::path dir_;
};

struct LiveConfig {
    std::string endpoint;  // full URL of a chat-completions route
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    double top_p = 1.0;
    int top_k = 1;
    int timeout_seconds = 120;

    /// FCMFORGE_LLM_ENDPOINT, FCMFORGE_LLM_MODEL, FCMFORGE_LLM_API_KEY.
    static LiveConfig from_env();
};

/// Chat-completions style JSON over HTTP(S).
class LiveBackend final : public LlmBackend {
public:
    explicit LiveBackend(LiveConfig config);
    ChatResponse complete(const ChatRequest& request) const override;
    std::string describe() const override;

    /// Wire body for a request; exposed for tests.
    std::string request_body(const ChatRequest& request) const;

private:
    LiveConfig config_;
};

enum class BackendKind { fixture, live };

struct BackendConfig {
    BackendKind kind = BackendKind::fixture;
    std::filesystem::path fixture_dir;
    LiveConfig live;
    std::size_t max_retries = 2;
    std::size_t concurrency = 4;
};

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config);

}  // namespace fcmforge
