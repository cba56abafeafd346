#include "fcmforge/extraction.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "fcmforge/fcm_io.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace {

std::string weight_text(const nlohmann::json& w) { return w.is_number() ? format_weight(w.get<double>()) : w.dump(); }

}  // namespace

nlohmann::json report_json(const ValidationReport& report) {
    return {{"dropped_dead_nodes", report.dropped_dead_nodes},
            {"out_of_range", report.out_of_range},
            {"unresolved", report.unresolved},
            {"problems", report.problems}};
}

nlohmann::json extract_json_object(const std::string& content) {
    std::string body = content;
    const auto fence = body.find("```");
    if (fence != std::string::npos) {
        auto start = body.find('\n', fence);
        auto end = start == std::string::npos ? std::string::npos : body.find("```", start);
        if (end != std::string::npos) body = body.substr(start + 1, end - start - 1);
    }
    auto first = body.find('{');
    auto last = body.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first) {
        throw ValidationError("reply contains no JSON object");
    }
    try {
        return nlohmann::json::parse(body.substr(first, last - first + 1));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("reply is not valid JSON: ") + e.what());
    }
}

ParsedFcm parse_llm_fcm(const nlohmann::json& output, const std::string& name, ValidationReport* report_out) {
    ValidationReport report;
    auto fail = [&](auto&& error) {
        if (report_out) *report_out = report;
        throw error;
    };
    if (!output.is_object() || !output.contains("nodes") || !output["nodes"].is_array()) {
        report.problems.push_back("missing \"nodes\" array");
        fail(ValidationError("structured output lacks a \"nodes\" array"));
    }
    const nlohmann::json edges_in = output.value("edges", nlohmann::json::array());
    if (!edges_in.is_array()) {
        report.problems.push_back("\"edges\" is not an array");
        fail(ValidationError("structured output has a non-array \"edges\""));
    }

    std::vector<std::string> labels;
    std::map<std::string, std::size_t> index;
    for (const auto& n : output["nodes"]) {
        std::string label;
        if (n.is_string()) {
            label = n.get<std::string>();
        } else if (n.is_object() && n.contains("label") && n["label"].is_string()) {
            label = n["label"].get<std::string>();
        } else {
            report.problems.push_back("node without a label: " + n.dump());
            continue;
        }
        label = trim(label);
        const auto canon = canonical_label(label);
        if (canon.empty()) {
            report.problems.push_back("node with an empty label");
            continue;
        }
        if (!index.emplace(canon, labels.size()).second) {
            report.problems.push_back("duplicate node label '" + label + "'");
            continue;
        }
        labels.push_back(label);
    }

    struct Raw {
        std::size_t s, t;
        double w;
    };
    std::vector<Raw> raw;
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : edges_in) {
        if (!e.is_object() || !e.contains("source") || !e.contains("target") || !e.contains("weight") ||
            !e["source"].is_string() || !e["target"].is_string()) {
            report.problems.push_back("malformed edge: " + e.dump());
            continue;
        }
        const auto src = e["source"].get<std::string>();
        const auto tgt = e["target"].get<std::string>();
        const auto& w = e["weight"];
        auto si = index.find(canonical_label(src));
        auto ti = index.find(canonical_label(tgt));
        bool usable = true;
        if (si == index.end()) {
            report.unresolved.push_back(src);
            usable = false;
        }
        if (ti == index.end()) {
            report.unresolved.push_back(tgt);
            usable = false;
        }
        if (!w.is_number() || !std::isfinite(w.get<double>()) || std::abs(w.get<double>()) > 1.0) {
            report.out_of_range.push_back(fmt::format("{} -> {} = {}", src, tgt, weight_text(w)));
            usable = false;
        }
        if (!usable) continue;
        if (!pairs.emplace(si->second, ti->second).second) {
            report.problems.push_back("duplicate edge " + src + " -> " + tgt);
            continue;
        }
        if (w.get<double>() != 0.0) raw.push_back({si->second, ti->second, w.get<double>()});
    }

    if (!report.out_of_range.empty()) {
        fail(ValidationError("edge weight out of [-1, 1]: " + join(report.out_of_range, "; ")));
    }
    if (!report.unresolved.empty()) {
        fail(ValidationError("edge endpoint names an undeclared node: " + join(report.unresolved, ", ")));
    }
    if (!report.problems.empty()) fail(ValidationError(join(report.problems, "; ")));
    if (labels.empty()) fail(DegenerateError("empty FCM: no nodes extracted"));

    std::vector<bool> live(labels.size(), false);
    for (const auto& r : raw) live[r.s] = live[r.t] = true;
    std::vector<ConceptNode> nodes;
    std::vector<std::string> order;
    std::vector<std::size_t> remap(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!live[i]) {
            report.dropped_dead_nodes.push_back(labels[i]);
            continue;
        }
        remap[i] = nodes.size();
        const auto id = "n" + std::to_string(i + 1);
        nodes.push_back({id, labels[i], std::nullopt});
        order.push_back(id);
    }
    if (nodes.empty()) fail(DegenerateError("empty FCM: no node has a causal link"));
    std::vector<Edge> edges;
    for (const auto& r : raw) edges.push_back({remap[r.s], remap[r.t], r.w});
    if (report_out) *report_out = report;
    return {FcmGraph(name, std::move(nodes), EdgeMatrix(std::move(order), std::move(edges), true)), report};
}

nlohmann::json record_json(const ExtractionRecord& record) {
    nlohmann::json attempts = nlohmann::json::array();
    for (const auto& a : record.attempts) {
        attempts.push_back({{"request", a.request_body}, {"response", a.response_body}, {"error", a.error}});
    }
    nlohmann::json doc = {{"fcm_id", record.fcm_id},
                          {"chunk", record.chunk},
                          {"ok", record.ok},
                          {"attempts", std::move(attempts)},
                          {"validation", report_json(record.report)}};
    doc["error"] = record.ok ? nlohmann::json() : nlohmann::json(record.error);
    doc["fcm"] = record.fcm ? fcm_to_json(*record.fcm) : nlohmann::json();
    return doc;
}

ExtractionRecord extract_fcm(const std::string& chunk_text, const LlmBackend& backend,
                             const ExtractionOptions& options) {
    ExtractionRecord record;
    record.fcm_id = options.fcm_id;
    record.chunk = options.chunk;
    if (trim(chunk_text).empty()) {
        record.error = "empty chunk text";
        record.error_kind = ErrorKind::validation;
        return record;
    }
    ChatRequest request;
    request.task = "extract";
    request.payload = chunk_text;
    request.messages = {{"system", extraction_system_prompt()}, {"user", extraction_user_message(chunk_text)}};

    for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
        request.attempt = attempt;
        ExtractionAttempt log;
        ChatResponse reply;
        try {
            reply = backend.complete(request);
        } catch (const Error& e) {
            log.error = e.what();
            record.attempts.push_back(std::move(log));
            record.error = e.what();
            record.error_kind = ErrorKind::backend;
            return record;
        }
        log.request_body = reply.request_body;
        log.response_body = reply.response_body;
        try {
            ValidationReport report;
            auto parsed = parse_llm_fcm(extract_json_object(reply.content), options.fcm_id, &report);
            record.report = std::move(parsed.report);
            record.fcm = parsed.fcm.with_provenance({{"chunk", options.chunk}, {"operation", "extract"}});
            record.ok = true;
            record.attempts.push_back(std::move(log));
            return record;
        } catch (const DegenerateError& e) {
            log.error = e.what();
            record.attempts.push_back(std::move(log));
            record.error = e.what();
            record.error_kind = ErrorKind::degenerate;
            return record;
        } catch (const ValidationError& e) {
            log.error = e.what();
            record.attempts.push_back(std::move(log));
            record.error = e.what();
            record.error_kind = ErrorKind::validation;
            request.messages.push_back({"assistant", reply.content});
            request.messages.push_back({"user", repair_message(e.what())});
        }
    }
    record.error = "output still invalid after " + std::to_string(options.max_retries) + " repair attempts: " +
                   record.error;
    return record;
}

std::vector<ExtractionRecord> extract_all(std::span<const ExtractionJob> jobs, const LlmBackend& backend,
                                          std::size_t concurrency) {
    std::vector<ExtractionRecord> records(jobs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, jobs.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            records[i] = extract_fcm(jobs[i].text, backend, jobs[i].options);
        }
    };
    if (workers == 1) {
        work();
        return records;
    }
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    return records;
}

}  // namespace fcmforge
