#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/error.hpp"

namespace polyforge {

enum class MessageRole { kSystem, kUser, kAssistant };

std::string_view to_string(MessageRole role) noexcept;

struct ChatMessage {
  MessageRole role = MessageRole::kUser;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::int64_t max_tokens = 1024;
  /// Free-form labels (purpose, record id, ...). Stored with cache entries
  /// for provenance but never part of the fingerprint.
  std::map<std::string, std::string> metadata;
};

/// Throws Error(kPrecondition) unless messages are non-empty, the last one
/// is from the user, temperature >= 0 and max_tokens > 0.
void validate(const ChatRequest& request);

/// The exact bytes hashed into a fingerprint: model, messages, temperature
/// and max_tokens in a fixed JSON layout.
std::string canonical_request(const ChatRequest& request);

/// Lowercase hex SHA-256 of canonical_request().
std::string fingerprint(const ChatRequest& request);

enum class FinishReason { kStop, kLength, kError };

std::string_view to_string(FinishReason reason) noexcept;

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;

  bool operator==(const ChatResponse&) const = default;
};

enum class CacheMode { kRecord, kReplay, kPassthrough };

std::string_view to_string(CacheMode mode) noexcept;
/// Throws Error(kConfig) for anything but record|replay|passthrough.
CacheMode parse_cache_mode(std::string_view text);

struct CacheEntry {
  std::string fingerprint;
  ChatRequest request;
  ChatResponse response;
};

/// Content-addressed store of endpoint responses: one `<fingerprint>.json`
/// file per request under `root`. Writes go through a temp file and rename.
class ReplayCache {
 public:
  ReplayCache(std::filesystem::path root, CacheMode mode);

  CacheMode mode() const noexcept { return mode_; }
  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path entry_path(std::string_view fingerprint) const;

  std::optional<CacheEntry> lookup(std::string_view fingerprint) const;
  void store(const ChatRequest& request, const ChatResponse& response);
  /// Every readable entry, sorted by fingerprint.
  std::vector<CacheEntry> entries() const;

 private:
  std::filesystem::path root_;
  CacheMode mode_;
  std::mutex write_mutex_;
};

/// Raised by transports; the gateway decides whether to retry.
class TransportError : public std::runtime_error {
 public:
  enum class Kind { kTransient, kRateLimited, kPermanent };

  TransportError(Kind kind, const std::string& message,
                 std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : std::runtime_error(message), kind_(kind), retry_after_(retry_after) {}

  Kind kind() const noexcept { return kind_; }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }

 private:
  Kind kind_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// POSTs `{base_url}/chat/completions` with a bearer token.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpEndpoint endpoint);

  /// Reads the base URL and key from the named environment variables.
  /// Throws Error(kConfig) when the URL variable is unset.
  static std::shared_ptr<HttpChatTransport> from_env(const std::string& url_var, const std::string& key_var);

  ChatResponse send(const ChatRequest& request) override;

  /// Exposed for tests: the JSON body sent for `request`.
  static std::string request_body(const ChatRequest& request);
  /// Exposed for tests: decodes a chat-completions response body.
  static ChatResponse parse_response_body(std::string_view body);

 private:
  HttpEndpoint endpoint_;
  std::string origin_;
  std::string path_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
  /// When false a rate-limit signal surfaces immediately as Error(kRateLimited).
  bool wait_on_rate_limit = true;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t parallelism = 4;
  /// Minimum spacing between live requests; zero disables rate limiting.
  std::chrono::milliseconds min_request_interval{0};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleep_for
};

struct GatewayCounters {
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_stores = 0;
  std::size_t retries = 0;
};

struct ChatOutcome {
  std::string fingerprint;
  std::optional<ChatResponse> response;
  std::optional<Error> error;
};

/// Single entry point for every LLM call. Shareable across threads; at most
/// `parallelism` calls are in flight at once. In replay mode the transport
/// is never touched.
class Gateway {
 public:
  Gateway(std::filesystem::path cache_root, CacheMode mode, std::shared_ptr<ChatTransport> transport,
          GatewayOptions options = {});

  /// Errors: kCacheMiss (replay, unseen fingerprint), kEndpointError (retries
  /// exhausted or no transport), kRateLimited (policy forbids waiting).
  ChatResponse chat(const ChatRequest& request);

  /// Bounded-parallel chat; outcome i belongs to request i.
  std::vector<ChatOutcome> chat_many(std::span<const ChatRequest> requests);

  GatewayCounters counters() const;
  /// Fingerprints answered so far (cache or network), in completion order.
  std::vector<std::string> served() const;
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  std::size_t parallelism() const noexcept { return options_.parallelism; }
  const ReplayCache& cache() const noexcept { return cache_; }
  CacheMode mode() const noexcept { return cache_.mode(); }

 private:
  ChatResponse live_call(const ChatRequest& request);
  void pace();
  void note_served(const std::string& fp);

  ReplayCache cache_;
  std::shared_ptr<ChatTransport> transport_;
  GatewayOptions options_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};

  mutable std::mutex mutex_;
  GatewayCounters counters_;
  std::vector<std::string> served_;
  std::chrono::steady_clock::time_point next_slot_{};
};

}  // namespace polyforge
