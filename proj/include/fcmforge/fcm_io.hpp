#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "fcmforge/fcm.hpp"

namespace fcmforge {

/// Deterministic pretty printer. Floating-point numbers are written with at
/// least 12 significant digits and always parse back to the same double.
/// Arrays holding only scalars are printed on one line.
std::string dump_json(const nlohmann::json& value, int indent = 2);

nlohmann::json parse_json(const std::string& text, const std::string& what);

nlohmann::json fcm_to_json(const FcmGraph& fcm);
FcmGraph fcm_from_json(const nlohmann::json& doc);

std::string serialize_fcm(const FcmGraph& fcm);
FcmGraph deserialize_fcm(const std::string& text);

void save_fcm(const FcmGraph& fcm, const std::string& path);
FcmGraph load_fcm(const std::string& path);

}  // namespace fcmforge
