#include "fcmforge/service.hpp"

#include <httplib.h>
#include <fmt/format.h>

#include <algorithm>
#include <regex>

#include "fcmforge/algebra.hpp"
#include "fcmforge/error.hpp"
#include "fcmforge/fcm_io.hpp"
#include "fcmforge/dynamics_io.hpp"
#include "fcmforge/pipeline.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct NotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

HttpResponse reply(int status, const json& body) { return {status, dump_json(body)}; }

HttpResponse error_reply(int status, const std::string& message) { return reply(status, {{"error", message}}); }

json summary(const std::string& id, const FcmGraph& fcm) {
    return {{"id", id},
            {"name", fcm.name()},
            {"nodes", fcm.size()},
            {"edges", fcm.matrix().edge_count()},
            {"bounded", fcm.matrix().bounded()}};
}

std::vector<std::string> id_list(const json& request, const char* key) {
    if (!request.contains(key) || !request[key].is_array() || request[key].empty()) {
        throw ValidationError(std::string("'") + key + "' must be a nonempty array of FCM ids");
    }
    return request[key].get<std::vector<std::string>>();
}

std::optional<std::vector<double>> weight_list(const json& request) {
    if (!request.contains("weights") || request["weights"].is_null()) return std::nullopt;
    return request["weights"].get<std::vector<double>>();
}

MixSpec spec_for(const std::optional<std::vector<double>>& weights, std::size_t count, MixKind kind) {
    if (!weights) return MixSpec::equal(count, kind);
    if (weights->size() != count) {
        throw ValidationError(fmt::format("{} weights given for {} FCMs", weights->size(), count));
    }
    return MixSpec(*weights, kind);
}

}  // namespace

WhatIfQuery what_if_from_json(const json& request, std::size_t max_steps_cap) {
    WhatIfQuery q;
    if (request.contains("clamps") && !request["clamps"].is_null()) {
        const auto& c = request["clamps"];
        if (c.is_object()) {
            for (const auto& [label, v] : c.items()) q.clamps.push_back({label, v.get<double>(), std::nullopt});
        } else if (c.is_array()) {
            for (const auto& s : c) q.clamps.push_back(parse_control(s.get<std::string>(), false));
        } else {
            throw ValidationError("'clamps' must be an object or an array");
        }
    }
    if (request.contains("pulses") && !request["pulses"].is_null()) {
        for (const auto& p : request["pulses"]) {
            if (p.is_string()) {
                q.pulses.push_back(parse_control(p.get<std::string>(), true));
            } else {
                q.pulses.push_back({p.at("label").get<std::string>(), p.value("value", 1.0), p.value("step", std::size_t{0})});
            }
        }
    }
    if (request.contains("init") && !request["init"].is_null()) {
        for (const auto& [label, v] : request["init"].items()) q.init[label] = v.get<double>();
    }
    if (request.contains("squash")) q.squash = squash_from_json(request["squash"]);
    q.max_steps = std::min(request.value("max_steps", default_max_steps), max_steps_cap);
    if (q.max_steps == 0) throw ValidationError("max_steps must be positive");
    return q;
}

ServiceCore::ServiceCore(ServiceConfig config) : config_(std::move(config)) {
    if (!config_.run_dir) return;
    const auto dir = *config_.run_dir / "fcm";
    if (!fs::is_directory(dir)) throw IoError("run directory has no fcm/ folder");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().stem() != "posterior-set") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) shared_.emplace(f.stem().string(), load_fcm(f.string()));
}

json ServiceCore::list_fcms(const std::string& session) {
    std::map<std::string, json> rows;
    for (const auto& [id, f] : shared_) rows[id] = summary(id, f);
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, f] : sessions_[session].fcms) rows[id] = summary(id, f);
    }
    json out = json::array();
    for (auto& [id, row] : rows) out.push_back(std::move(row));
    return out;
}

FcmGraph ServiceCore::lookup(const std::string& session, const std::string& id) {
    {
        std::lock_guard lock(mutex_);
        auto& own = sessions_[session].fcms;
        if (auto it = own.find(id); it != own.end()) return it->second;
    }
    if (auto it = shared_.find(id); it != shared_.end()) return it->second;
    throw NotFound("unknown FCM id '" + id + "'");
}

std::string ServiceCore::store(const std::string& session, const std::string& prefix, const FcmGraph& fcm) {
    // content addressed, so repeating a request returns the same id
    const auto id = prefix + sha256_hex(serialize_fcm(fcm)).substr(0, 12);
    std::lock_guard lock(mutex_);
    sessions_[session].fcms.insert_or_assign(id, fcm);
    return id;
}

json ServiceCore::simulate(const std::string& session, const json& request) {
    const auto id = request.at("fcm_id").get<std::string>();
    const auto fcm = lookup(session, id);
    const auto query = what_if_from_json(request, config_.max_steps_cap);
    const auto out = run_what_if(fcm, query);
    json states = json::array();
    for (const auto& s : out.result.trajectory.states) states.push_back(s.values);
    json clamps = json::object();
    for (const auto& [node, v] : out.controls.clamps) clamps[node] = v;
    json labels = json::array();
    for (const auto& n : fcm.nodes()) labels.push_back(n.label);
    return {{"fcm_id", id},
            {"labels", std::move(labels)},
            {"binary", out.binary},
            {"clamped", std::move(clamps)},
            {"max_steps", query.max_steps},
            {"trajectory", std::move(states)},
            {"trajectory_csv", out.trajectory_csv},
            {"attractor", out.attractor}};
}

json ServiceCore::mix(const std::string& session, const json& request) {
    std::vector<FcmGraph> fcms;
    for (const auto& id : id_list(request, "fcm_ids")) fcms.push_back(lookup(session, id));
    const auto kind = request.value("kind", std::string("likelihood")) == "posterior" ? MixKind::posterior
                                                                                      : MixKind::likelihood;
    const auto spec = spec_for(weight_list(request), fcms.size(), kind);
    auto mixed = fcmforge::mix(fcms, spec, request.value("name", std::string("mixture")));
    const auto id = store(session, "m-", mixed);
    return {{"id", id}, {"fcm", summary(id, mixed)}};
}

json ServiceCore::dechunk(const std::string& session, const json& request) {
    const auto ids = id_list(request, "fcm_ids");
    std::vector<FcmGraph> fcms;
    for (const auto& id : ids) fcms.push_back(lookup(session, id));
    const auto spec = spec_for(weight_list(request), fcms.size(), MixKind::likelihood);
    const auto handling = posterior_handling_from(request.value("handling", std::string("clip")));
    const double eps = request.value("prune_epsilon", default_prune_epsilon);
    const auto set = posterior(fcms, spec);
    json out_ids = json::array();
    json empty = json::array();
    for (std::size_t k = 0; k < set.matrices.size(); ++k) {
        try {
            auto p = prune_to_fcm(apply_handling(set.matrices[k], handling), set.order, eps, "posterior-of-" + ids[k]);
            p = p.with_provenance({{"operation", "posterior"},
                                   {"likelihood", ids[k]},
                                   {"method", to_string(set.method)},
                                   {"handling", to_string(handling)}});
            out_ids.push_back(store(session, "p-", p));
        } catch (const DegenerateError&) {
            out_ids.push_back(nullptr);
            empty.push_back(ids[k]);
        }
    }
    if (empty.size() == ids.size()) throw DegenerateError("every posterior FCM is empty");
    return {{"ids", std::move(out_ids)},
            {"empty", std::move(empty)},
            {"method", to_string(set.method)},
            {"residual", set.residual},
            {"rank", set.rank}};
}

HttpResponse ServiceCore::handle(const std::string& method, const std::string& path, const std::string& body,
                                 const std::string& session_header) {
    static const std::regex fcm_route(R"(^/fcms/([A-Za-z0-9._-]+)$)");
    static const std::regex draft_route(R"(^/drafts/([A-Za-z0-9._-]+)$)");
    const std::string session = session_header.empty() ? "default" : session_header;
    auto body_json = [&]() {
        try {
            return json::parse(body);
        } catch (const json::exception& e) {
            throw BadRequest(std::string("malformed JSON body: ") + e.what());
        }
    };
    std::smatch m;
    try {
        if (method == "GET" && path == "/fcms") return reply(200, list_fcms(session));
        if (method == "GET" && std::regex_match(path, m, fcm_route)) return reply(200, fcm_to_json(lookup(session, m[1])));
        if (method == "POST" && path == "/fcms") {
            const auto fcm = fcm_from_json(body_json());
            const auto id = store(session, "u-", fcm);
            return reply(201, {{"id", id}, {"fcm", summary(id, fcm)}});
        }
        if (method == "POST" && path == "/simulate") return reply(200, simulate(session, body_json()));
        if (method == "POST" && path == "/mix") return reply(201, mix(session, body_json()));
        if (method == "POST" && path == "/dechunk") return reply(201, dechunk(session, body_json()));
        if (std::regex_match(path, m, draft_route)) {
            const std::string id = m[1];
            const auto fcm = lookup(session, id);
            if (method == "GET") {
                std::lock_guard lock(mutex_);
                auto& drafts = sessions_[session].drafts;
                auto it = drafts.find(id);
                return reply(200, it == drafts.end() ? json{{"clamps", json::object()}, {"pulses", json::array()}}
                                                     : it->second);
            }
            if (method == "PUT") {
                auto draft = body_json();
                if (!draft.is_object()) throw ValidationError("draft must be a JSON object");
                // a draft must describe a runnable question for this FCM
                auto q = what_if_from_json(draft, 1);
                q.max_steps = 1;
                (void)run_what_if(fcm, q);
                json stored = {{"clamps", draft.value("clamps", json::object())},
                               {"pulses", draft.value("pulses", json::array())}};
                std::lock_guard lock(mutex_);
                sessions_[session].drafts[id] = stored;
                return reply(200, stored);
            }
        }
        if (path == "/fcms" || path == "/simulate" || path == "/mix" || path == "/dechunk" ||
            std::regex_match(path, m, fcm_route) || std::regex_match(path, m, draft_route)) {
            return error_reply(405, "method " + method + " not allowed on " + path);
        }
        return error_reply(404, "no route " + path);
    } catch (const NotFound& e) {
        return error_reply(404, e.what());
    } catch (const BadRequest& e) {
        return error_reply(400, e.what());
    } catch (const json::exception& e) {
        return error_reply(422, std::string("malformed request: ") + e.what());
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::validation: return error_reply(422, e.what());
            case ErrorKind::degenerate: return error_reply(409, e.what());
            case ErrorKind::backend: return error_reply(502, e.what());
            case ErrorKind::io: return error_reply(500, e.what());
        }
        return error_reply(500, e.what());
    }
}

struct HttpService::Impl {
    ServiceCore core;
    httplib::Server server;

    explicit Impl(ServiceConfig config) : core(std::move(config)) {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type, X-Session"}});
        // routed handlers, not the pre-routing hook: request bodies are read only after routing
        auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
            const auto r = core.handle(req.method, req.path, req.body, req.get_header_value("X-Session"));
            res.status = r.status;
            res.set_content(r.body, "application/json");
        };
        server.Get(".*", dispatch);
        server.Post(".*", dispatch);
        server.Put(".*", dispatch);
        server.Delete(".*", dispatch);
        server.Patch(".*", dispatch);
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
};

HttpService::HttpService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError(fmt::format("cannot bind {}:{}", host, port));
    return bound;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace fcmforge
