#include "synthpar/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

#include "synthpar/corpus.hpp"

namespace synthpar {

namespace {
std::atomic<bool> g_enabled{true};
std::mutex g_mu;
}  // namespace

void set_logging_enabled(bool enabled) { g_enabled = enabled; }

void log_event(std::string_view event, nlohmann::json fields) {
  if (!g_enabled) return;
  nlohmann::json line = nlohmann::json::object();
  line["ts"] = utc_now();
  line["event"] = std::string(event);
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) line[k] = v;
  }
  const auto text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(g_mu);
  std::cerr << text << '\n';
}

}  // namespace synthpar
