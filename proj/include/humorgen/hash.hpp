#pragma once

#include <string>
#include <string_view>

namespace humorgen {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Stable identifier for a joke text: "j" + first 16 hex chars of its SHA-256.
std::string joke_id_for(std::string_view text);

}  // namespace humorgen
