#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcmforge/dynamics.hpp"

namespace fcmforge {

/// A what-if control named by node label (canonical exact match).
struct LabeledControl {
    std::string label;
    double value = 1.0;
    std::optional<std::size_t> step;  // set for pulses

    bool operator==(const LabeledControl&) const = default;
};

/// Parses "<label>=<value>" (clamp) or "<label>=<value>@<step>" (pulse).
LabeledControl parse_control(const std::string& text, bool pulse);

struct WhatIfQuery {
    std::vector<LabeledControl> clamps;
    std::vector<LabeledControl> pulses;
    std::map<std::string, double> init;  // label -> value; unnamed nodes start at 0
    SquashingConfig squash;
    std::size_t max_steps = default_max_steps;
};

struct WhatIfOutcome {
    ControlSchedule controls;
    SimulationResult result;
    bool binary = true;
    std::vector<std::string> skipped;  // labels absent from the FCM (only when skipping is allowed)
    std::string trajectory_csv;
    nlohmann::json attractor;
};

/// Resolves labels, simulates, and renders the CSV and attractor report. The CLI,
/// the pipeline and the HTTP service all answer questions through this call.
/// Unknown labels throw ValidationError unless `skip_missing`.
WhatIfOutcome run_what_if(const FcmGraph& fcm, const WhatIfQuery& query, bool skip_missing = false);

}  // namespace fcmforge
