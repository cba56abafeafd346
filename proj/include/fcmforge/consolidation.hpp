#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

#include "fcmforge/extraction.hpp"
#include "fcmforge/fcm.hpp"
#include "fcmforge/llm_backend.hpp"

namespace fcmforge {

const std::string& consolidation_system_prompt();
std::string consolidation_user_message(const std::string& payload);

struct NodeList {
    std::string fcm_id;
    std::vector<ConceptNode> nodes;
};

struct DedupResult {
    std::vector<std::string> survivors;              // first-seen label per canonical form
    std::size_t merged_count = 0;                    // length of the concatenated lists
    std::map<std::string, std::size_t> survivor_of;  // "<fcm>/<node>" -> survivor index
};

/// Concatenates the lists and collapses labels that agree after canonicalisation.
DedupResult deduplicate(const std::vector<NodeList>& lists);

struct Cluster {
    std::string id;  // "c-" + 12 hex digits of the hash of the sorted member labels
    std::string label;
    std::string theme;
    std::vector<std::string> members;  // survivor labels

    bool operator==(const Cluster&) const = default;
};

struct NodeMapping {
    std::vector<Cluster> clusters;               // sorted by canonical label
    std::map<std::string, std::string> entries;  // "<fcm>/<node>" -> cluster id
    std::size_t merged_count = 0;

    std::size_t theme_count() const;
    const Cluster* find(const std::string& cluster_id) const;
    bool operator==(const NodeMapping&) const = default;
};

std::string mapping_key(const std::string& fcm_id, const std::string& node_id);
std::string cluster_id(const std::vector<std::string>& members);

/// Validates an LLM consolidation reply against the deduplicated list and builds
/// the mapping. Throws ValidationError when the mapping is not total, a node
/// sits in two themes or clusters, or a member is unknown.
NodeMapping mapping_from_reply(const DedupResult& dedup, const nlohmann::json& reply);

struct ConsolidationResult {
    NodeMapping mapping;
    std::vector<ExtractionAttempt> attempts;
};

/// The LLM payload for a deduplicated list (fixture key material).
std::string consolidation_payload(const DedupResult& dedup);

ConsolidationResult consolidate(const DedupResult& dedup, const LlmBackend& backend, std::size_t max_retries = 2);

nlohmann::json mapping_json(const NodeMapping& mapping);
NodeMapping mapping_from_json(const nlohmann::json& doc);

/// Re-expresses a local FCM over consolidated nodes. Parallel edges produced by
/// merging average their weights; conflicting signs add a warning.
FcmGraph remap_fcm(const FcmGraph& local, const std::string& fcm_id, const NodeMapping& mapping,
                   std::vector<std::string>* warnings = nullptr);

}  // namespace fcmforge
