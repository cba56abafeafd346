#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fcmforge {

/// Trim, ASCII case-fold, and collapse internal whitespace runs to one space.
/// Two labels name the same concept iff their canonical forms are equal.
std::string canonical_label(std::string_view label);

std::string trim(std::string_view s);

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Decimal with at least 12 significant digits that parses back to exactly `value`.
std::string format_weight(double value);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fcmforge
