#include "fcmforge/llm_backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

// Splits "https://host:port/path" into scheme+authority and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw BackendError("endpoint '" + url + "' is not an absolute URL");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

FixtureBackend::FixtureBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw BackendError("fixture directory '" + dir_.string() + "' not found");
}

std::string FixtureBackend::fixture_key(const std::string& payload) { return sha256_hex(payload); }

ChatResponse FixtureBackend::complete(const ChatRequest& request) const {
    const auto key = fixture_key(request.payload);
    const auto base = dir_ / request.task;
    std::filesystem::path path = base / (key + ".json");
    if (request.attempt > 0) {
        auto retry = base / (key + ".retry" + std::to_string(request.attempt) + ".json");
        if (std::filesystem::exists(retry)) path = retry;
    }
    if (!std::filesystem::exists(path)) {
        throw BackendError("no fixture reply for " + request.task + " key " + key);
    }
    ChatResponse r;
    r.content = read_file(path.string());
    r.request_body = nlohmann::json{{"fixture", (std::filesystem::path(request.task) / path.filename()).string()},
                                    {"attempt", request.attempt}}
                         .dump();
    r.response_body = r.content;
    return r;
}

std::string FixtureBackend::describe() const { return "fixture:" + dir_.string(); }

LiveConfig LiveConfig::from_env() {
    LiveConfig c;
    c.endpoint = env_or_empty("FCMFORGE_LLM_ENDPOINT");
    c.model = env_or_empty("FCMFORGE_LLM_MODEL");
    c.api_key = env_or_empty("FCMFORGE_LLM_API_KEY");
    return c;
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw BackendError("live backend needs FCMFORGE_LLM_ENDPOINT");
    if (config_.model.empty()) throw BackendError("live backend needs FCMFORGE_LLM_MODEL");
}

std::string LiveBackend::request_body(const ChatRequest& request) const {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json body = {{"model", config_.model},
                           {"messages", std::move(messages)},
                           {"temperature", config_.temperature},
                           {"top_p", config_.top_p},
                           {"top_k", config_.top_k},
                           {"response_format", {{"type", "json_object"}}}};
    return body.dump();
}

ChatResponse LiveBackend::complete(const ChatRequest& request) const {
    const auto [origin, path] = split_url(config_.endpoint);
    httplib::Client client(origin);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(30, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    ChatResponse r;
    r.request_body = request_body(request);
    auto res = client.Post(path, headers, r.request_body, "application/json");
    if (!res) throw BackendError("transport failure: " + httplib::to_string(res.error()));
    r.response_body = res->body;
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
        const auto doc = nlohmann::json::parse(res->body);
        r.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected chat-completions response: ") + e.what());
    }
    return r;
}

std::string LiveBackend::describe() const { return "live:" + config_.model + "@" + config_.endpoint; }

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::fixture) return std::make_unique<FixtureBackend>(config.fixture_dir);
    return std::make_unique<LiveBackend>(config.live);
}

}  // namespace fcmforge
