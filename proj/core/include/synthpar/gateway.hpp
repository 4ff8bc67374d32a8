#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/corpus.hpp"

namespace synthpar {

enum class BackendKind { chat_llm, seq2seq_mt, mock };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view s);

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 250;
};

struct BackendProfile {
  std::string backend_id;
  BackendKind kind = BackendKind::mock;
  std::optional<std::string> endpoint_url;
  std::string model_name;
  std::string auth_env_var;  // bearer token source; empty means no auth header
  int max_parallel_requests = 1;
  RetryPolicy retry;
  int request_timeout_ms = 60000;
  /// Segments per seq2seq request.
  int batch_size = 16;
  /// Languages the backend serves; empty means any.
  std::vector<LangCode> languages;
  /// Mock only: when set, every completion returns this text.
  std::optional<std::string> mock_fixed_response;

  void validate() const;
};

void to_json(nlohmann::json& j, const BackendProfile& p);
void from_json(const nlohmann::json& j, BackendProfile& p);

struct DecodeParams {
  double temperature = 1.0;
  int beam_size = 1;
  int max_new_tokens = 512;
  std::optional<std::uint64_t> seed;

  /// beam_size > 1 requires temperature == 0.
  void validate() const;

  static DecodeParams greedy(int max_new_tokens = 256) { return {0.0, 1, max_new_tokens, std::nullopt}; }
  static DecodeParams beam(int width, int max_new_tokens = 256) {
    return {0.0, width, max_new_tokens, std::nullopt};
  }
};

struct CompletionResult {
  std::string text;
  std::string backend_id;
  double latency_ms = 0.0;
  int attempt_count = 0;
};

/// One slot of a translate_batch result.
struct TranslationOutcome {
  std::optional<std::string> text;
  std::string error;

  bool ok() const { return text.has_value(); }
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection failure or timeout; the gateway retries these.
class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// POST transport. Implementations throw TransportFailure for connection
/// problems and return any HTTP status otherwise.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            int timeout_ms) = 0;
};

std::shared_ptr<Transport> make_http_transport();

/// Observation record emitted for each backend request.
struct RequestEvent {
  std::string backend_id;
  std::string model_name;
  std::string operation;  // "complete" or "translate_batch"
  DecodeParams params;
  std::size_t segments = 0;
};

/// Shared entry point to generation and translation backends. Thread-safe;
/// bounds in-flight requests per backend_id at the profile's
/// max_parallel_requests.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Transport> transport = make_http_transport(),
                   Sleeper sleeper = {});

  CompletionResult complete(const BackendProfile& profile, std::string_view prompt,
                            const DecodeParams& params);

  std::vector<TranslationOutcome> translate_batch(const BackendProfile& profile,
                                                  std::span<const std::string> segments,
                                                  const Direction& direction,
                                                  const DecodeParams& params);

  void set_observer(std::function<void(const RequestEvent&)> observer);

  /// Backend requests issued so far, mock included.
  std::uint64_t call_count() const { return calls_.load(); }

 private:
  class Limiter {
   public:
    explicit Limiter(int capacity) : capacity_(capacity) {}
    void acquire();
    void release();

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    int capacity_;
    int in_use_ = 0;
  };

  Limiter& limiter_for(const BackendProfile& profile);
  HttpResponse send_with_retry(const BackendProfile& profile, const std::string& body,
                               int* attempts);
  void notify(const RequestEvent& event);

  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::mutex limiters_mu_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
  std::mutex observer_mu_;
  std::function<void(const RequestEvent&)> observer_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace synthpar
