#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "fcmforge/fcm.hpp"
#include "fcmforge/whatif.hpp"

namespace fcmforge {

inline constexpr std::size_t service_max_steps_cap = 10000;

struct ServiceConfig {
    std::optional<std::filesystem::path> run_dir;  // FCMs under <run>/fcm/ are visible to every session
    std::size_t max_steps_cap = service_max_steps_cap;
};

struct HttpResponse {
    int status = 200;
    std::string body;  // JSON
};

/// Request handling without the network. Each session (X-Session header, default
/// "default") sees the shared run-directory FCMs plus its own uploads, derived
/// FCMs and control drafts.
class ServiceCore {
public:
    explicit ServiceCore(ServiceConfig config = {});

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body,
                        const std::string& session = "default");

private:
    struct Session {
        std::map<std::string, FcmGraph> fcms;
        std::map<std::string, nlohmann::json> drafts;  // fcm id -> {clamps, pulses}
    };

    nlohmann::json list_fcms(const std::string& session);
    FcmGraph lookup(const std::string& session, const std::string& id);
    std::string store(const std::string& session, const std::string& prefix, const FcmGraph& fcm);

    nlohmann::json simulate(const std::string& session, const nlohmann::json& request);
    nlohmann::json mix(const std::string& session, const nlohmann::json& request);
    nlohmann::json dechunk(const std::string& session, const nlohmann::json& request);

    ServiceConfig config_;
    std::map<std::string, FcmGraph> shared_;  // read-only after construction
    std::mutex mutex_;                        // guards sessions_
    std::map<std::string, Session> sessions_;
};

/// Parses the /simulate controls: `clamps` as {label: value} or ["label=value"],
/// `pulses` as [{label, value, step}] or ["label=value@step"], `init` as {label: value}.
WhatIfQuery what_if_from_json(const nlohmann::json& request, std::size_t max_steps_cap);

/// Blocking HTTP server over a ServiceCore. `stop` may be called from another thread.
class HttpService {
public:
    explicit HttpService(ServiceConfig config);
    ~HttpService();

    /// Binds to `port` (0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fcmforge
