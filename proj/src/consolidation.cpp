#include "fcmforge/consolidation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

std::string mapping_key(const std::string& fcm_id, const std::string& node_id) { return fcm_id + "/" + node_id; }

std::string cluster_id(const std::vector<std::string>& members) {
    std::vector<std::string> canon;
    for (const auto& m : members) canon.push_back(canonical_label(m));
    std::sort(canon.begin(), canon.end());
    return "c-" + sha256_hex(join(canon, "\n")).substr(0, 12);
}

DedupResult deduplicate(const std::vector<NodeList>& lists) {
    DedupResult out;
    std::map<std::string, std::size_t> by_canon;
    for (const auto& list : lists) {
        for (const auto& node : list.nodes) {
            ++out.merged_count;
            auto canon = canonical_label(node.label);
            auto [it, inserted] = by_canon.emplace(canon, out.survivors.size());
            if (inserted) out.survivors.push_back(trim(node.label));
            out.survivor_of[mapping_key(list.fcm_id, node.id)] = it->second;
        }
    }
    return out;
}

std::size_t NodeMapping::theme_count() const {
    std::set<std::string> themes;
    for (const auto& c : clusters) themes.insert(c.theme);
    return themes.size();
}

const Cluster* NodeMapping::find(const std::string& id) const {
    for (const auto& c : clusters) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

namespace {

NodeMapping assemble(const DedupResult& dedup, std::vector<Cluster> clusters,
                     const std::vector<std::size_t>& cluster_of_survivor) {
    std::vector<std::string> ids;
    for (auto& c : clusters) {
        c.id = cluster_id(c.members);
        ids.push_back(c.id);
    }
    NodeMapping mapping;
    mapping.merged_count = dedup.merged_count;
    for (const auto& [key, survivor] : dedup.survivor_of) mapping.entries[key] = ids[cluster_of_survivor[survivor]];
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        return canonical_label(a.label) < canonical_label(b.label);
    });
    mapping.clusters = std::move(clusters);
    return mapping;
}

}  // namespace

NodeMapping mapping_from_reply(const DedupResult& dedup, const nlohmann::json& reply) {
    if (!reply.is_object() || !reply.contains("themes") || !reply["themes"].is_array()) {
        throw ValidationError("consolidation reply lacks a \"themes\" array");
    }
    std::map<std::string, std::size_t> survivor_index;
    for (std::size_t i = 0; i < dedup.survivors.size(); ++i) survivor_index[canonical_label(dedup.survivors[i])] = i;

    constexpr std::size_t unassigned = static_cast<std::size_t>(-1);
    std::vector<std::size_t> cluster_of(dedup.survivors.size(), unassigned);
    std::vector<std::string> theme_of(dedup.survivors.size());
    std::vector<Cluster> clusters;
    std::set<std::string> labels;
    std::vector<std::string> problems;

    for (const auto& theme : reply["themes"]) {
        if (!theme.is_object() || !theme.contains("name") || !theme["name"].is_string() || !theme.contains("clusters") ||
            !theme["clusters"].is_array()) {
            problems.push_back("malformed theme: " + theme.dump());
            continue;
        }
        const auto theme_name = trim(theme["name"].get<std::string>());
        for (const auto& c : theme["clusters"]) {
            if (!c.is_object() || !c.contains("label") || !c["label"].is_string() || !c.contains("members") ||
                !c["members"].is_array() || c["members"].empty()) {
                problems.push_back("malformed cluster in theme '" + theme_name + "'");
                continue;
            }
            Cluster cluster{"", trim(c["label"].get<std::string>()), theme_name, {}};
            if (canonical_label(cluster.label).empty() || !labels.insert(canonical_label(cluster.label)).second) {
                problems.push_back("consolidated label '" + cluster.label + "' is empty or repeated");
                continue;
            }
            for (const auto& m : c["members"]) {
                if (!m.is_string()) {
                    problems.push_back("non-string member in cluster '" + cluster.label + "'");
                    continue;
                }
                auto it = survivor_index.find(canonical_label(m.get<std::string>()));
                if (it == survivor_index.end()) {
                    problems.push_back("unknown node '" + m.get<std::string>() + "'");
                    continue;
                }
                const std::size_t s = it->second;
                if (cluster_of[s] != unassigned) {
                    if (theme_of[s] != theme_name) {
                        problems.push_back(fmt::format("node '{}' assigned to themes '{}' and '{}'", dedup.survivors[s],
                                                       theme_of[s], theme_name));
                    } else {
                        problems.push_back("node '" + dedup.survivors[s] + "' placed in two clusters");
                    }
                    continue;
                }
                cluster_of[s] = clusters.size();
                theme_of[s] = theme_name;
                cluster.members.push_back(dedup.survivors[s]);
            }
            if (!cluster.members.empty()) clusters.push_back(std::move(cluster));
        }
    }
    std::vector<std::string> missing;
    for (std::size_t s = 0; s < cluster_of.size(); ++s) {
        if (cluster_of[s] == unassigned) missing.push_back(dedup.survivors[s]);
    }
    if (!missing.empty()) problems.push_back("mapping not total; unassigned: " + join(missing, ", "));
    if (!problems.empty()) throw ValidationError(join(problems, "; "));
    return assemble(dedup, std::move(clusters), cluster_of);
}

std::string consolidation_payload(const DedupResult& dedup) { return nlohmann::json(dedup.survivors).dump(); }

ConsolidationResult consolidate(const DedupResult& dedup, const LlmBackend& backend, std::size_t max_retries) {
    if (dedup.survivors.empty()) throw ValidationError("consolidation needs a non-empty node list");
    ConsolidationResult result;
    if (dedup.survivors.size() == 1) {
        const auto& only = dedup.survivors.front();
        result.mapping = assemble(dedup, {Cluster{"", only, only, {only}}}, {0});
        return result;
    }
    ChatRequest request;
    request.task = "consolidate";
    request.payload = consolidation_payload(dedup);
    request.messages = {{"system", consolidation_system_prompt()},
                        {"user", consolidation_user_message(request.payload)}};
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
        request.attempt = attempt;
        auto reply = backend.complete(request);
        ExtractionAttempt log{reply.request_body, reply.response_body, ""};
        try {
            result.mapping = mapping_from_reply(dedup, extract_json_object(reply.content));
            result.attempts.push_back(std::move(log));
            return result;
        } catch (const ValidationError& e) {
            last_error = e.what();
            log.error = last_error;
            result.attempts.push_back(std::move(log));
            request.messages.push_back({"assistant", reply.content});
            request.messages.push_back({"user", repair_message(last_error)});
        }
    }
    throw BackendError("consolidation output invalid after " + std::to_string(max_retries) +
                       " repair attempts: " + last_error);
}

nlohmann::json mapping_json(const NodeMapping& mapping) {
    nlohmann::json themes = nlohmann::json::object();
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& c : mapping.clusters) {
        themes[c.id] = c.theme;
        clusters.push_back({{"id", c.id}, {"label", c.label}, {"theme", c.theme}, {"members", c.members}});
    }
    return {{"themes", std::move(themes)},
            {"clusters", std::move(clusters)},
            {"mapping", mapping.entries},
            {"merged_count", mapping.merged_count}};
}

NodeMapping mapping_from_json(const nlohmann::json& doc) {
    try {
        NodeMapping m;
        m.merged_count = doc.at("merged_count").get<std::size_t>();
        for (const auto& c : doc.at("clusters")) {
            m.clusters.push_back({c.at("id").get<std::string>(), c.at("label").get<std::string>(),
                                  c.at("theme").get<std::string>(), c.at("members").get<std::vector<std::string>>()});
        }
        m.entries = doc.at("mapping").get<std::map<std::string, std::string>>();
        for (const auto& [key, id] : m.entries) {
            if (!m.find(id)) throw ValidationError("mapping entry '" + key + "' names unknown cluster " + id);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("node mapping: ") + e.what());
    }
}

FcmGraph remap_fcm(const FcmGraph& local, const std::string& fcm_id, const NodeMapping& mapping,
                   std::vector<std::string>* warnings) {
    std::vector<const Cluster*> target_of(local.size());
    std::map<std::string, const Cluster*> used;  // canonical label -> cluster
    for (std::size_t i = 0; i < local.size(); ++i) {
        auto it = mapping.entries.find(mapping_key(fcm_id, local.nodes()[i].id));
        if (it == mapping.entries.end()) {
            throw ValidationError("node '" + local.nodes()[i].label + "' of " + fcm_id + " is not covered by the mapping");
        }
        const Cluster* c = mapping.find(it->second);
        if (!c) throw ValidationError("mapping names unknown cluster " + it->second);
        target_of[i] = c;
        used.emplace(canonical_label(c->label), c);
    }
    std::vector<ConceptNode> nodes;
    std::vector<std::string> order;
    std::map<std::string, std::size_t> position;
    for (const auto& [canon, c] : used) {
        position[c->id] = nodes.size();
        nodes.push_back({c->id, c->label, c->theme});
        order.push_back(c->id);
    }
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> collected;
    for (const auto& e : local.matrix().edges()) {
        collected[{position[target_of[e.source]->id], position[target_of[e.target]->id]}].push_back(e.weight);
    }
    std::vector<Edge> edges;
    for (const auto& [key, weights] : collected) {
        double sum = 0.0;
        bool pos = false, neg = false;
        for (double w : weights) {
            sum += w;
            pos = pos || w > 0.0;
            neg = neg || w < 0.0;
        }
        if (pos && neg && warnings) {
            warnings->push_back(fmt::format("{}: merged edge {} -> {} combines weights of opposite sign", fcm_id,
                                            nodes[key.first].label, nodes[key.second].label));
        }
        const double mean = std::clamp(sum / static_cast<double>(weights.size()), -1.0, 1.0);
        edges.push_back({key.first, key.second, mean});
    }
    nlohmann::json provenance = local.provenance();
    if (provenance.is_null()) provenance = nlohmann::json::object();
    provenance["consolidated_from"] = fcm_id;
    return FcmGraph(local.name(), std::move(nodes), EdgeMatrix(std::move(order), std::move(edges), true),
                    std::move(provenance));
}

}  // namespace fcmforge
