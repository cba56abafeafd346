#include "fcmforge/dynamics_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fcmforge/error.hpp"

namespace fcmforge {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Endpoints of the activation scale and the clamp marker.
constexpr int inactive_rgb[3] = {0x44, 0x01, 0x54};
constexpr int active_rgb[3] = {0xfd, 0xe7, 0x25};
constexpr const char* clamped_fill = "#d62728";

std::string blend(double v) {
    v = std::clamp(v, 0.0, 1.0);
    int c[3];
    for (int i = 0; i < 3; ++i) {
        c[i] = static_cast<int>(std::lround(inactive_rgb[i] + v * (active_rgb[i] - inactive_rgb[i])));
    }
    return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

}  // namespace

std::string trajectory_csv(const FcmGraph& fcm, const Trajectory& trajectory, bool binary) {
    std::string out = "t";
    for (const auto& n : fcm.nodes()) out += "," + csv_field(n.label);
    out += "\n";
    for (const auto& s : trajectory.states) {
        out += std::to_string(s.time);
        for (double v : s.values) {
            out += ",";
            out += binary ? (v != 0.0 ? "1" : "0") : fmt::format("{:.12f}", v);
        }
        out += "\n";
    }
    return out;
}

nlohmann::json attractor_json(const Attractor& attractor, std::size_t transient) {
    bool bits = true;
    for (const auto& s : attractor.cycle_states) {
        for (double v : s) bits = bits && (v == 0.0 || v == 1.0);
    }
    nlohmann::json cycle = nlohmann::json::array();
    for (const auto& s : attractor.cycle_states) {
        nlohmann::json row = nlohmann::json::array();
        for (double v : s) {
            if (bits) {
                row.push_back(static_cast<int>(v));
            } else {
                row.push_back(v);
            }
        }
        cycle.push_back(std::move(row));
    }
    return {{"kind", to_string(attractor.kind)},
            {"period", attractor.period},
            {"transient", transient},
            {"cycle", std::move(cycle)}};
}

nlohmann::json census_json(const FcmGraph& fcm, const Census& census) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : census.entries) {
        nlohmann::json cycle = nlohmann::json::array();
        for (const auto& s : e.attractor.cycle_states) {
            nlohmann::json bits = nlohmann::json::array();
            for (double v : s) bits.push_back(static_cast<int>(v));
            cycle.push_back(std::move(bits));
        }
        entries.push_back({{"kind", to_string(e.attractor.kind)},
                           {"period", e.attractor.period},
                           {"basin", e.basin},
                           {"cycle", std::move(cycle)}});
    }
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& n : fcm.nodes()) labels.push_back(n.label);
    return {{"fcm", fcm.name()},
            {"labels", std::move(labels)},
            {"policy", census.exhaustive ? "exhaustive" : "sampled"},
            {"initial_states", census.initial_states},
            {"attractors", std::move(entries)}};
}

std::string raster_svg(const FcmGraph& fcm, const Trajectory& trajectory, const ControlSchedule& controls) {
    constexpr int cell = 18;
    constexpr int label_width = 260;
    constexpr int top = 30;
    const int cols = static_cast<int>(trajectory.states.size());
    const int rows = static_cast<int>(fcm.size());
    const int width = label_width + cols * cell + 20;
    const int height = top + rows * cell + 40;

    std::set<std::size_t> clamped;
    for (const auto& [id, v] : controls.clamps) {
        if (auto i = fcm.find_id(id)) clamped.insert(*i);
    }

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n",
        width, height);
    out += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\">{}</text>\n", label_width, xml_escape(fcm.name()));
    for (int r = 0; r < rows; ++r) {
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", label_width - 6,
                           top + r * cell + cell - 5, xml_escape(fcm.nodes()[static_cast<std::size_t>(r)].label));
    }
    for (int c = 0; c < cols; ++c) {
        const auto& s = trajectory.states[static_cast<std::size_t>(c)];
        for (int r = 0; r < rows; ++r) {
            const auto ri = static_cast<std::size_t>(r);
            const bool is_clamped = clamped.contains(ri);
            const std::string fill = is_clamped ? clamped_fill : blend(s.values[ri]);
            const char* state = is_clamped ? "clamped" : (s.values[ri] >= 0.5 ? "active" : "inactive");
            out += fmt::format(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\" "
                "data-t=\"{}\" data-node=\"{}\" class=\"{}\"/>\n",
                label_width + c * cell, top + r * cell, cell, cell, fill, s.time, r, state);
        }
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                           label_width + c * cell + cell / 2, top + rows * cell + 14, s.time);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">time step</text>\n",
                       label_width + cols * cell / 2, top + rows * cell + 32);
    out += "</svg>\n";
    return out;
}

nlohmann::json squash_json(const SquashingConfig& squash) {
    if (squash.kind == SquashKind::hard_threshold) return {{"kind", "hard"}, {"threshold", squash.threshold}};
    return {{"kind", "logistic"}, {"steepness", squash.steepness}};
}

SquashingConfig squash_from_json(const nlohmann::json& doc) {
    if (doc.is_null()) return SquashingConfig::hard();
    const auto kind = doc.value("kind", std::string("hard"));
    SquashingConfig s;
    if (kind == "hard" || kind == "hard-threshold") {
        s = SquashingConfig::hard(doc.value("threshold", 0.0));
    } else if (kind == "logistic") {
        s = SquashingConfig::logistic(doc.value("steepness", 5.0));
    } else {
        throw ValidationError("unknown squashing kind '" + kind + "'");
    }
    s.validate();
    return s;
}

}  // namespace fcmforge
