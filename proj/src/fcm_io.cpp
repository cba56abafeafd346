#include "fcmforge/fcm_io.hpp"

#include <fmt/format.h>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace {

bool is_scalar_array(const nlohmann::json& v) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
        if (e.is_structured()) return false;
    }
    return true;
}

void dump_into(const nlohmann::json& v, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (v.type()) {
        case nlohmann::json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad;
                out += nlohmann::json(it.key()).dump();
                out += ": ";
                dump_into(it.value(), indent, depth + 1, out);
            }
            out += "\n" + close_pad + "}";
            return;
        }
        case nlohmann::json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            if (is_scalar_array(v)) {
                out += "[";
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (i != 0) out += ", ";
                    dump_into(v[i], indent, depth + 1, out);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i != 0) out += ",\n";
                out += pad;
                dump_into(v[i], indent, depth + 1, out);
            }
            out += "\n" + close_pad + "]";
            return;
        }
        case nlohmann::json::value_t::number_float:
            out += format_weight(v.get<double>());
            return;
        default:
            out += v.dump();
            return;
    }
}

}  // namespace

std::string dump_json(const nlohmann::json& value, int indent) {
    std::string out;
    dump_into(value, indent, 0, out);
    out += "\n";
    return out;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(what + ": malformed JSON: " + e.what());
    }
}

nlohmann::json fcm_to_json(const FcmGraph& fcm) {
    nlohmann::json doc;
    doc["name"] = fcm.name();
    doc["bounded"] = fcm.matrix().bounded();
    auto nodes = nlohmann::json::array();
    for (const auto& n : fcm.nodes()) {
        nlohmann::json node = {{"id", n.id}, {"label", n.label}};
        if (n.theme) node["theme"] = *n.theme;
        nodes.push_back(std::move(node));
    }
    doc["nodes"] = std::move(nodes);
    auto edges = nlohmann::json::array();
    const auto& order = fcm.matrix().order();
    for (const auto& e : fcm.matrix().edges()) {
        edges.push_back({{"source", order[e.source]}, {"target", order[e.target]}, {"weight", e.weight}});
    }
    doc["edges"] = std::move(edges);
    if (!fcm.provenance().is_null()) doc["provenance"] = fcm.provenance();
    return doc;
}

FcmGraph fcm_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object()) throw ValidationError("FCM document must be a JSON object");
        const auto name = doc.at("name").get<std::string>();
        const bool bounded = doc.value("bounded", true);
        std::vector<ConceptNode> nodes;
        std::vector<std::string> order;
        std::map<std::string, std::size_t> index;
        for (const auto& n : doc.at("nodes")) {
            ConceptNode node{n.at("id").get<std::string>(), n.at("label").get<std::string>(), std::nullopt};
            if (n.contains("theme") && !n["theme"].is_null()) node.theme = n["theme"].get<std::string>();
            if (!index.emplace(node.id, nodes.size()).second) {
                throw ValidationError("FCM document '" + name + "': duplicate node id '" + node.id + "'");
            }
            order.push_back(node.id);
            nodes.push_back(std::move(node));
        }
        std::vector<Edge> edges;
        for (const auto& e : doc.at("edges")) {
            const auto s = e.at("source").get<std::string>();
            const auto t = e.at("target").get<std::string>();
            auto si = index.find(s);
            auto ti = index.find(t);
            if (si == index.end() || ti == index.end()) {
                throw ValidationError("FCM document '" + name + "': edge " + s + " -> " + t + " names an unknown node");
            }
            edges.push_back({si->second, ti->second, e.at("weight").get<double>()});
        }
        nlohmann::json provenance = doc.contains("provenance") ? doc["provenance"] : nlohmann::json();
        return FcmGraph(name, std::move(nodes), EdgeMatrix(std::move(order), std::move(edges), bounded),
                        std::move(provenance));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("FCM document: ") + e.what());
    }
}

std::string serialize_fcm(const FcmGraph& fcm) { return dump_json(fcm_to_json(fcm)); }

FcmGraph deserialize_fcm(const std::string& text) { return fcm_from_json(parse_json(text, "FCM document")); }

void save_fcm(const FcmGraph& fcm, const std::string& path) { write_file(path, serialize_fcm(fcm)); }

FcmGraph load_fcm(const std::string& path) { return deserialize_fcm(read_file(path)); }

}  // namespace fcmforge
