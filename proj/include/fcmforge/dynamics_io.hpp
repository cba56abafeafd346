#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "fcmforge/dynamics.hpp"

namespace fcmforge {

/// Header `t,<label>...`; 0/1 cells for binary runs, otherwise 12-decimal values.
std::string trajectory_csv(const FcmGraph& fcm, const Trajectory& trajectory, bool binary);

/// { "kind", "period", "transient", "cycle": [[...]] }
nlohmann::json attractor_json(const Attractor& attractor, std::size_t transient);

nlohmann::json census_json(const FcmGraph& fcm, const Census& census);

/// Time on x, nodes on y. Inactive, active and clamped cells use distinct fills;
/// partial activations blend between the inactive and active colours.
std::string raster_svg(const FcmGraph& fcm, const Trajectory& trajectory, const ControlSchedule& controls);

nlohmann::json squash_json(const SquashingConfig& squash);
SquashingConfig squash_from_json(const nlohmann::json& doc);

}  // namespace fcmforge
