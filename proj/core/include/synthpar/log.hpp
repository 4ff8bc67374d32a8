#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

namespace synthpar {

/// One JSON object per line on stderr: {"ts":..., "event":..., ...fields}.
void log_event(std::string_view event, nlohmann::json fields = nlohmann::json::object());

/// Globally enables or silences log_event (tests silence it).
void set_logging_enabled(bool enabled);

}  // namespace synthpar
