#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcmforge/error.hpp"
#include "fcmforge/fcm.hpp"
#include "fcmforge/llm_backend.hpp"

namespace fcmforge {

/// System prompt for one-call local FCM extraction.
const std::string& extraction_system_prompt();
std::string extraction_user_message(const std::string& chunk_text);
std::string repair_message(const std::string& problem);

struct ValidationReport {
    std::vector<std::string> dropped_dead_nodes;
    std::vector<std::string> out_of_range;
    std::vector<std::string> unresolved;
    std::vector<std::string> problems;  // everything else: duplicates, missing fields
};

nlohmann::json report_json(const ValidationReport& report);

struct ParsedFcm {
    FcmGraph fcm;
    ValidationReport report;
};

/// Builds a local FCM from `{ "nodes": [{"label"}], "edges": [{"source","target","weight"}] }`.
/// Nodes without any edge are dropped and reported. Throws ValidationError on
/// out-of-range weights, dangling endpoints, or duplicate labels, and
/// DegenerateError when nothing causal remains. `report`, when given, receives
/// the findings even on failure.
ParsedFcm parse_llm_fcm(const nlohmann::json& output, const std::string& name, ValidationReport* report = nullptr);

/// Pulls the first JSON object out of a chat reply (code fences and chatter tolerated).
nlohmann::json extract_json_object(const std::string& content);

struct ExtractionAttempt {
    std::string request_body;
    std::string response_body;
    std::string error;
};

struct ExtractionRecord {
    std::string fcm_id;
    nlohmann::json chunk;  // provenance of the source chunk
    std::vector<ExtractionAttempt> attempts;
    std::optional<FcmGraph> fcm;
    ValidationReport report;
    bool ok = false;
    std::string error;
    std::optional<ErrorKind> error_kind;
};

nlohmann::json record_json(const ExtractionRecord& record);

struct ExtractionOptions {
    std::size_t max_retries = 2;
    std::string fcm_id = "local";
    nlohmann::json chunk;  // provenance copied into the record and the FCM
};

/// Runs the three-stage extraction prompt in one call and validates the reply,
/// re-asking with a repair instruction on malformed output. Never throws for
/// LLM-side failures: they are reported in the record.
ExtractionRecord extract_fcm(const std::string& chunk_text, const LlmBackend& backend,
                             const ExtractionOptions& options = {});

struct ExtractionJob {
    std::string text;
    ExtractionOptions options;
};

/// Extracts every job with at most `concurrency` calls in flight. Results are in job order.
std::vector<ExtractionRecord> extract_all(std::span<const ExtractionJob> jobs, const LlmBackend& backend,
                                          std::size_t concurrency);

}  // namespace fcmforge
