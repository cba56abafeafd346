#include "fcmforge/whatif.hpp"

#include <cstdlib>

#include "fcmforge/dynamics_io.hpp"
#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace {

double parse_number(const std::string& text, const std::string& what) {
    char* end = nullptr;
    const auto t = trim(text);
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw ValidationError("cannot parse " + what + " '" + text + "'");
    return v;
}

}  // namespace

LabeledControl parse_control(const std::string& text, bool pulse) {
    const auto eq = text.rfind('=');
    if (eq == std::string::npos) throw ValidationError("control '" + text + "' must look like <label>=<value>");
    LabeledControl c;
    c.label = trim(text.substr(0, eq));
    std::string rest = text.substr(eq + 1);
    if (pulse) {
        const auto at = rest.find('@');
        if (at == std::string::npos) throw ValidationError("pulse '" + text + "' must look like <label>=<value>@<step>");
        const double step = parse_number(rest.substr(at + 1), "pulse step");
        if (step < 0 || step != static_cast<double>(static_cast<std::size_t>(step))) {
            throw ValidationError("pulse step must be a nonnegative integer");
        }
        c.step = static_cast<std::size_t>(step);
        rest = rest.substr(0, at);
    }
    c.value = parse_number(rest, "control value");
    if (c.label.empty()) throw ValidationError("control '" + text + "' has an empty label");
    return c;
}

WhatIfOutcome run_what_if(const FcmGraph& fcm, const WhatIfQuery& query, bool skip_missing) {
    WhatIfOutcome out;
    auto resolve = [&](const std::string& label) -> std::optional<std::string> {
        if (auto i = fcm.find_label(label)) return fcm.nodes()[*i].id;
        if (!skip_missing) throw ValidationError("unknown node label '" + label + "' in FCM '" + fcm.name() + "'");
        out.skipped.push_back(label);
        return std::nullopt;
    };
    for (const auto& c : query.clamps) {
        if (auto id = resolve(c.label)) out.controls.clamps[*id] = c.value;
    }
    for (const auto& p : query.pulses) {
        if (auto id = resolve(p.label)) out.controls.pulses.push_back({*id, p.value, p.step.value_or(0)});
    }
    StateVector init{std::vector<double>(fcm.size(), 0.0), 0};
    for (const auto& [label, v] : query.init) {
        auto i = fcm.find_label(label);
        if (!i) throw ValidationError("unknown node label '" + label + "' in initial state");
        init.values[*i] = v;
    }
    out.result = simulate(fcm, init, out.controls, query.squash, query.max_steps);
    out.binary = is_binary_run(init, out.controls, query.squash);
    out.trajectory_csv = trajectory_csv(fcm, out.result.trajectory, out.binary);
    out.attractor = attractor_json(out.result.attractor, out.result.trajectory.transient_length);
    return out;
}

}  // namespace fcmforge
