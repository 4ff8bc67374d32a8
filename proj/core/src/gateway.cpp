#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "synthpar/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "synthpar/hashing.hpp"
#include "synthpar/mock.hpp"

namespace synthpar {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::chat_llm: return "chat_llm";
    case BackendKind::seq2seq_mt: return "seq2seq_mt";
    case BackendKind::mock: return "mock";
  }
  return "mock";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "chat_llm") return BackendKind::chat_llm;
  if (s == "seq2seq_mt") return BackendKind::seq2seq_mt;
  if (s == "mock") return BackendKind::mock;
  throw ConfigError("unknown backend kind '" + std::string(s) + "'");
}

void BackendProfile::validate() const {
  if (backend_id.empty()) throw ConfigError("backend profile without backend_id");
  if (kind != BackendKind::mock && (!endpoint_url || endpoint_url->empty())) {
    throw ConfigError("backend '" + backend_id + "' requires endpoint_url");
  }
  if (max_parallel_requests < 1) {
    throw ConfigError("backend '" + backend_id + "': max_parallel_requests must be >= 1");
  }
  if (retry.max_attempts < 1) throw ConfigError("backend '" + backend_id + "': max_attempts must be >= 1");
  if (retry.base_backoff_ms < 0) throw ConfigError("backend '" + backend_id + "': negative backoff");
  if (batch_size < 1) throw ConfigError("backend '" + backend_id + "': batch_size must be >= 1");
  if (request_timeout_ms < 1) throw ConfigError("backend '" + backend_id + "': request_timeout_ms must be >= 1");
}

void to_json(json& j, const BackendProfile& p) {
  j = json{{"backend_id", p.backend_id},
           {"kind", std::string(to_string(p.kind))},
           {"model_name", p.model_name},
           {"auth_env_var", p.auth_env_var},
           {"max_parallel_requests", p.max_parallel_requests},
           {"retry_policy", {{"max_attempts", p.retry.max_attempts}, {"base_backoff_ms", p.retry.base_backoff_ms}}},
           {"request_timeout_ms", p.request_timeout_ms},
           {"batch_size", p.batch_size},
           {"languages", p.languages}};
  j["endpoint_url"] = p.endpoint_url ? json(*p.endpoint_url) : json(nullptr);
  if (p.mock_fixed_response) j["mock_fixed_response"] = *p.mock_fixed_response;
}

void from_json(const json& j, BackendProfile& p) {
  p = BackendProfile{};
  j.at("backend_id").get_to(p.backend_id);
  p.kind = backend_kind_from_string(j.at("kind").get<std::string>());
  if (const auto it = j.find("endpoint_url"); it != j.end() && !it->is_null()) {
    p.endpoint_url = it->get<std::string>();
  }
  p.model_name = j.value("model_name", p.backend_id);
  p.auth_env_var = j.value("auth_env_var", std::string{});
  p.max_parallel_requests = j.value("max_parallel_requests", 1);
  if (const auto it = j.find("retry_policy"); it != j.end()) {
    p.retry.max_attempts = it->value("max_attempts", p.retry.max_attempts);
    p.retry.base_backoff_ms = it->value("base_backoff_ms", p.retry.base_backoff_ms);
  }
  p.request_timeout_ms = j.value("request_timeout_ms", p.request_timeout_ms);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.languages = j.value("languages", std::vector<LangCode>{});
  if (const auto it = j.find("mock_fixed_response"); it != j.end() && !it->is_null()) {
    p.mock_fixed_response = it->get<std::string>();
  }
  p.validate();
}

void DecodeParams::validate() const {
  if (temperature < 0.0) throw ContractError("temperature must be >= 0");
  if (beam_size < 1) throw ContractError("beam_size must be >= 1");
  if (max_new_tokens < 1) throw ContractError("max_new_tokens must be >= 1");
  if (beam_size > 1 && temperature != 0.0) {
    throw ContractError("beam decoding requires temperature 0");
  }
}

// ---- HTTP transport -------------------------------------------------------

namespace {

class HttplibTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    int timeout_ms) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw TransportFailure(httplib::to_string(res.error()));
    return {res->status, res->body};
  }
};

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::vector<std::pair<std::string, std::string>> auth_headers(const BackendProfile& profile) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!profile.auth_env_var.empty()) {
    if (const char* token = std::getenv(profile.auth_env_var.c_str()); token != nullptr && *token != '\0') {
      headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

void check_direction(const BackendProfile& profile, const Direction& direction) {
  if (profile.languages.empty()) return;
  const auto serves = [&](const LangCode& l) {
    return std::find(profile.languages.begin(), profile.languages.end(), l) != profile.languages.end();
  };
  if (!serves(direction.source) || !serves(direction.target)) {
    throw CapabilityError("backend '" + profile.backend_id + "' does not support " + direction.str());
  }
}

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

// ---- Gateway --------------------------------------------------------------

void Gateway::Limiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < capacity_; });
  ++in_use_;
}

void Gateway::Limiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

Gateway::Gateway(std::shared_ptr<Transport> transport, Sleeper sleeper)
    : transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::set_observer(std::function<void(const RequestEvent&)> observer) {
  std::lock_guard lock(observer_mu_);
  observer_ = std::move(observer);
}

void Gateway::notify(const RequestEvent& event) {
  calls_.fetch_add(1);
  std::lock_guard lock(observer_mu_);
  if (observer_) observer_(event);
}

Gateway::Limiter& Gateway::limiter_for(const BackendProfile& profile) {
  std::lock_guard lock(limiters_mu_);
  auto& slot = limiters_[profile.backend_id];
  if (!slot) slot = std::make_unique<Limiter>(profile.max_parallel_requests);
  return *slot;
}

HttpResponse Gateway::send_with_retry(const BackendProfile& profile, const std::string& body,
                                      int* attempts) {
  auto& limiter = limiter_for(profile);
  const auto headers = auth_headers(profile);
  std::string last_error;
  for (int attempt = 1; attempt <= profile.retry.max_attempts; ++attempt) {
    *attempts = attempt;
    HttpResponse res;
    bool transport_ok = true;
    limiter.acquire();
    try {
      res = transport_->post(*profile.endpoint_url, body, headers, profile.request_timeout_ms);
    } catch (const TransportFailure& e) {
      transport_ok = false;
      last_error = e.what();
    } catch (...) {
      limiter.release();
      throw;
    }
    limiter.release();

    if (transport_ok) {
      if (res.status >= 200 && res.status < 300) return res;
      if (res.status >= 400 && res.status < 500) {
        throw ConfigError("backend '" + profile.backend_id + "' rejected the request with HTTP " +
                          std::to_string(res.status) + ": " + res.body.substr(0, 200));
      }
      last_error = "HTTP " + std::to_string(res.status);
    }
    if (attempt < profile.retry.max_attempts) {
      const auto backoff = static_cast<long long>(profile.retry.base_backoff_ms) << (attempt - 1);
      sleeper_(std::chrono::milliseconds(backoff));
    }
  }
  throw TransportError("backend '" + profile.backend_id + "' failed after " +
                       std::to_string(profile.retry.max_attempts) + " attempts: " + last_error);
}

CompletionResult Gateway::complete(const BackendProfile& profile, std::string_view prompt,
                                   const DecodeParams& params) {
  if (profile.kind != BackendKind::chat_llm && profile.kind != BackendKind::mock) {
    throw ContractError("complete() needs a chat_llm or mock profile, got " +
                        std::string(to_string(profile.kind)));
  }
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  notify({profile.backend_id, profile.model_name, "complete", params, 1});

  CompletionResult result;
  result.backend_id = profile.backend_id;
  if (profile.kind == BackendKind::mock) {
    auto& limiter = limiter_for(profile);
    limiter.acquire();
    result.text = profile.mock_fixed_response
                      ? *profile.mock_fixed_response
                      : mock::complete(prompt, params.seed.value_or(0), profile.model_name);
    limiter.release();
    result.attempt_count = 1;
  } else {
    json body{{"model", profile.model_name},
              {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
              {"temperature", params.temperature},
              {"max_tokens", params.max_new_tokens}};
    if (params.seed) body["seed"] = *params.seed;
    const auto res = send_with_retry(profile, body.dump(), &result.attempt_count);
    try {
      const auto reply = json::parse(res.body);
      const auto& choice = reply.at("choices").at(0);
      if (const auto msg = choice.find("message"); msg != choice.end()) {
        result.text = msg->at("content").get<std::string>();
      } else {
        result.text = choice.at("text").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw TransportError("backend '" + profile.backend_id + "' returned a malformed completion: " + e.what());
    }
  }
  result.latency_ms = elapsed_ms(start);
  if (result.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw EmptyOutputError("backend '" + profile.backend_id + "' returned an empty completion");
  }
  return result;
}

std::vector<TranslationOutcome> Gateway::translate_batch(const BackendProfile& profile,
                                                         std::span<const std::string> segments,
                                                         const Direction& direction,
                                                         const DecodeParams& params) {
  if (profile.kind != BackendKind::seq2seq_mt && profile.kind != BackendKind::mock) {
    throw ContractError("translate_batch() needs a seq2seq_mt or mock profile, got " +
                        std::string(to_string(profile.kind)));
  }
  if (segments.empty()) throw ContractError("translate_batch() called with no segments");
  params.validate();
  check_direction(profile, direction);

  std::vector<TranslationOutcome> out(segments.size());
  const auto batch = static_cast<std::size_t>(profile.batch_size);
  const std::size_t n_batches = (segments.size() + batch - 1) / batch;

  auto run_batch = [&](std::size_t b) {
    const auto begin = b * batch;
    const auto end = std::min(segments.size(), begin + batch);
    notify({profile.backend_id, profile.model_name, "translate_batch", params, end - begin});
    if (profile.kind == BackendKind::mock) {
      for (auto i = begin; i < end; ++i) {
        out[i].text = mock::translate(segments[i], direction.source.str(), direction.target.str(),
                                      profile.model_name);
      }
      return;
    }
    json body{{"model", profile.model_name},
              {"source_lang", direction.source.str()},
              {"target_lang", direction.target.str()},
              {"texts", std::vector<std::string>(segments.begin() + begin, segments.begin() + end)},
              {"beam_size", params.beam_size}};
    try {
      int attempts = 0;
      const auto res = send_with_retry(profile, body.dump(), &attempts);
      const auto reply = json::parse(res.body);
      const auto& translations = reply.at("translations");
      if (!translations.is_array() || translations.size() != end - begin) {
        throw TransportError("translation count mismatch");
      }
      for (auto i = begin; i < end; ++i) {
        const auto& t = translations[i - begin];
        if (t.is_string() && !t.get<std::string>().empty()) {
          out[i].text = t.get<std::string>();
        } else {
          out[i].error = "backend returned no translation for this segment";
        }
      }
    } catch (const std::exception& e) {
      for (auto i = begin; i < end; ++i) {
        out[i].text.reset();
        out[i].error = e.what();
      }
    }
  };

  const auto workers = std::min<std::size_t>(n_batches, static_cast<std::size_t>(profile.max_parallel_requests));
  if (profile.kind == BackendKind::mock || workers <= 1) {
    for (std::size_t b = 0; b < n_batches; ++b) run_batch(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) run_batch(b);
    });
  }
  pool.clear();
  return out;
}

}  // namespace synthpar
