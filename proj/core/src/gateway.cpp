#include "polyforge/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "polyforge/hash.hpp"
#include "polyforge/parallel.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

using ordered_json = nlohmann::ordered_json;

std::optional<MessageRole> parse_role(std::string_view s) {
  if (s == "system") return MessageRole::kSystem;
  if (s == "user") return MessageRole::kUser;
  if (s == "assistant") return MessageRole::kAssistant;
  return std::nullopt;
}

std::optional<FinishReason> parse_finish(std::string_view s) {
  if (s == "stop") return FinishReason::kStop;
  if (s == "length") return FinishReason::kLength;
  if (s == "error") return FinishReason::kError;
  return std::nullopt;
}

ordered_json messages_json(const ChatRequest& r) {
  ordered_json msgs = ordered_json::array();
  for (const auto& m : r.messages) {
    ordered_json jm;
    jm["role"] = std::string(to_string(m.role));
    jm["content"] = m.text;
    msgs.push_back(std::move(jm));
  }
  return msgs;
}

ordered_json request_json(const ChatRequest& r, bool with_metadata) {
  ordered_json j;
  j["model"] = r.model;
  j["messages"] = messages_json(r);
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  if (with_metadata) {
    ordered_json meta = ordered_json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = v;
    j["metadata"] = std::move(meta);
  }
  return j;
}

ordered_json response_json(const ChatResponse& r) {
  ordered_json j;
  j["text"] = r.text;
  j["finish_reason"] = std::string(to_string(r.finish_reason));
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["latency_ms"] = r.latency_ms;
  return j;
}

ChatRequest request_from_json(const ordered_json& j) {
  ChatRequest r;
  r.model = j.at("model").get<std::string>();
  for (const auto& m : j.at("messages")) {
    auto role = parse_role(m.at("role").get<std::string>());
    if (!role) throw std::runtime_error("bad message role");
    r.messages.push_back({*role, m.at("content").get<std::string>()});
  }
  r.temperature = j.at("temperature").get<double>();
  r.max_tokens = j.at("max_tokens").get<std::int64_t>();
  if (auto it = j.find("metadata"); it != j.end()) {
    for (const auto& [k, v] : it->items()) r.metadata[k] = v.get<std::string>();
  }
  return r;
}

ChatResponse response_from_json(const ordered_json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  auto finish = parse_finish(j.at("finish_reason").get<std::string>());
  if (!finish) throw std::runtime_error("bad finish_reason");
  r.finish_reason = *finish;
  r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  return r;
}

std::string dump(const ordered_json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

std::string_view to_string(MessageRole role) noexcept {
  switch (role) {
    case MessageRole::kSystem: return "system";
    case MessageRole::kUser: return "user";
    case MessageRole::kAssistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

std::string_view to_string(CacheMode mode) noexcept {
  switch (mode) {
    case CacheMode::kRecord: return "record";
    case CacheMode::kReplay: return "replay";
    case CacheMode::kPassthrough: return "passthrough";
  }
  return "record";
}

CacheMode parse_cache_mode(std::string_view text) {
  if (text == "record") return CacheMode::kRecord;
  if (text == "replay") return CacheMode::kReplay;
  if (text == "passthrough") return CacheMode::kPassthrough;
  fail(Errc::kConfig, "cache mode must be record, replay or passthrough, not '" + std::string(text) + "'");
}

void validate(const ChatRequest& request) {
  require(!request.messages.empty(), "chat request has no messages");
  require(request.messages.back().role == MessageRole::kUser, "last chat message must come from the user");
  require(request.temperature >= 0.0 && std::isfinite(request.temperature), "temperature must be >= 0");
  require(request.max_tokens > 0, "max_tokens must be positive");
}

std::string canonical_request(const ChatRequest& request) { return dump(request_json(request, false)); }

std::string fingerprint(const ChatRequest& request) { return sha256_hex(canonical_request(request)); }

// ---------------------------------------------------------------- cache

ReplayCache::ReplayCache(std::filesystem::path root, CacheMode mode) : root_(std::move(root)), mode_(mode) {}

std::filesystem::path ReplayCache::entry_path(std::string_view fp) const {
  return root_ / (std::string(fp) + ".json");
}

std::optional<CacheEntry> ReplayCache::lookup(std::string_view fp) const {
  const auto path = entry_path(fp);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  try {
    const auto j = ordered_json::parse(detail::read_file(path));
    return CacheEntry{j.at("fingerprint").get<std::string>(), request_from_json(j.at("request")),
                      response_from_json(j.at("response"))};
  } catch (const std::exception& e) {
    fail(Errc::kIo, "corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ReplayCache::store(const ChatRequest& request, const ChatResponse& response) {
  ordered_json j;
  const std::string fp = fingerprint(request);
  j["fingerprint"] = fp;
  j["request"] = request_json(request, true);
  j["response"] = response_json(response);
  std::lock_guard lock(write_mutex_);
  detail::write_file_atomic(entry_path(fp), dump(j, 2) + "\n");
}

std::vector<CacheEntry> ReplayCache::entries() const {
  std::vector<CacheEntry> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(root_, ec)) return out;
  std::vector<std::string> fps;
  for (const auto& de : std::filesystem::directory_iterator(root_)) {
    if (!de.is_regular_file() || de.path().extension() != ".json") continue;
    fps.push_back(de.path().stem().string());
  }
  std::sort(fps.begin(), fps.end());
  for (const auto& fp : fps) {
    if (auto e = lookup(fp)) out.push_back(std::move(*e));
  }
  return out;
}

// ---------------------------------------------------------------- gateway

Gateway::Gateway(std::filesystem::path cache_root, CacheMode mode, std::shared_ptr<ChatTransport> transport,
                 GatewayOptions options)
    : cache_(std::move(cache_root), mode),
      transport_(mode == CacheMode::kReplay ? nullptr : std::move(transport)),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.parallelism, 1, 1024))) {
  options_.parallelism = std::clamp<std::size_t>(options_.parallelism, 1, 1024);
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::note_served(const std::string& fp) {
  std::lock_guard lock(mutex_);
  served_.push_back(fp);
}

void Gateway::pace() {
  if (options_.min_request_interval.count() <= 0) return;
  std::chrono::steady_clock::time_point wait_until;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    wait_until = std::max(now, next_slot_);
    next_slot_ = wait_until + options_.min_request_interval;
  }
  const auto delay = std::chrono::duration_cast<std::chrono::milliseconds>(wait_until - std::chrono::steady_clock::now());
  if (delay.count() > 0) options_.sleep(delay);
}

ChatResponse Gateway::live_call(const ChatRequest& request) {
  if (!transport_) fail(Errc::kEndpointError, "no chat endpoint configured");
  const RetryPolicy& policy = options_.retry;
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, policy.max_attempts); ++attempt) {
    pace();
    try {
      {
        std::lock_guard lock(mutex_);
        ++counters_.network_calls;
      }
      const auto start = std::chrono::steady_clock::now();
      ChatResponse response = transport_->send(request);
      if (response.latency_ms == 0) {
        response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
      }
      return response;
    } catch (const TransportError& e) {
      last_error = e.what();
      if (e.kind() == TransportError::Kind::kPermanent) fail(Errc::kEndpointError, last_error);
      if (e.kind() == TransportError::Kind::kRateLimited && !policy.wait_on_rate_limit) {
        fail(Errc::kRateLimited, last_error);
      }
      if (attempt == policy.max_attempts) break;
      const auto delay = e.retry_after().value_or(backoff);
      {
        std::lock_guard lock(mutex_);
        ++counters_.retries;
      }
      options_.sleep(delay);
      backoff = std::min(policy.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy.multiplier)));
    }
  }
  fail(Errc::kEndpointError,
       "giving up after " + std::to_string(policy.max_attempts) + " attempts: " + last_error);
}

ChatResponse Gateway::chat(const ChatRequest& request) {
  validate(request);
  const std::string fp = fingerprint(request);

  slots_.acquire();
  struct Release {
    Gateway* g;
    ~Release() {
      g->in_flight_.fetch_sub(1);
      g->slots_.release();
    }
  } release{this};
  const std::size_t now = in_flight_.fetch_add(1) + 1;
  std::size_t seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }

  if (cache_.mode() != CacheMode::kPassthrough) {
    if (auto hit = cache_.lookup(fp)) {
      {
        std::lock_guard lock(mutex_);
        ++counters_.cache_hits;
      }
      note_served(fp);
      return hit->response;
    }
    if (cache_.mode() == CacheMode::kReplay) {
      fail(Errc::kCacheMiss, "no cached response for fingerprint " + fp);
    }
  }

  ChatResponse response = live_call(request);
  if (cache_.mode() == CacheMode::kRecord) {
    cache_.store(request, response);
    std::lock_guard lock(mutex_);
    ++counters_.cache_stores;
  }
  note_served(fp);
  return response;
}

std::vector<ChatOutcome> Gateway::chat_many(std::span<const ChatRequest> requests) {
  std::vector<ChatOutcome> outcomes(requests.size());
  parallel_for(requests.size(), options_.parallelism, [&](std::size_t i) {
    outcomes[i].fingerprint = fingerprint(requests[i]);
    try {
      outcomes[i].response = chat(requests[i]);
    } catch (const Error& e) {
      outcomes[i].error = e;
    }
  });
  return outcomes;
}

GatewayCounters Gateway::counters() const {
  std::lock_guard lock(mutex_);
  return counters_;
}

std::vector<std::string> Gateway::served() const {
  std::lock_guard lock(mutex_);
  return served_;
}

}  // namespace polyforge
