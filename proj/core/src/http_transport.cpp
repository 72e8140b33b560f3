#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "polyforge/gateway.hpp"

namespace polyforge {
namespace {

using json = nlohmann::json;

// Splits "https://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpChatTransport::HttpChatTransport(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.base_url.empty()) fail(Errc::kConfig, "chat endpoint base URL is empty");
  std::tie(origin_, path_) = split_base_url(endpoint_.base_url);
}

std::shared_ptr<HttpChatTransport> HttpChatTransport::from_env(const std::string& url_var,
                                                               const std::string& key_var) {
  const char* url = std::getenv(url_var.c_str());
  if (url == nullptr || *url == '\0') fail(Errc::kConfig, "environment variable " + url_var + " is not set");
  const char* key = std::getenv(key_var.c_str());
  return std::make_shared<HttpChatTransport>(HttpEndpoint{url, key ? key : "", std::chrono::seconds(120)});
}

std::string HttpChatTransport::request_body(const ChatRequest& request) {
  json body;
  body["model"] = request.model;
  body["messages"] = json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.text}});
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

ChatResponse HttpChatTransport::parse_response_body(std::string_view body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw TransportError(TransportError::Kind::kPermanent, "response is not JSON");
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw TransportError(TransportError::Kind::kPermanent, "response has no choices");
  }
  const auto& choice = choices->front();
  ChatResponse r;
  if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string()) {
    r.text = choice["message"]["content"].get<std::string>();
  }
  const std::string finish = choice.value("finish_reason", std::string("stop"));
  r.finish_reason = finish == "length" ? FinishReason::kLength : FinishReason::kStop;
  if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
    r.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    r.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
  }
  return r;
}

ChatResponse HttpChatTransport::send(const ChatRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(endpoint_.timeout);
  client.set_write_timeout(std::chrono::seconds(30));
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  auto res = client.Post(path_ + "/chat/completions", headers, request_body(request), "application/json");
  if (!res) {
    throw TransportError(TransportError::Kind::kTransient, "transport failure: " + httplib::to_string(res.error()));
  }
  if (res->status == 429) {
    std::optional<std::chrono::milliseconds> retry_after;
    if (res->has_header("Retry-After")) {
      const long secs = std::strtol(res->get_header_value("Retry-After").c_str(), nullptr, 10);
      if (secs > 0) retry_after = std::chrono::milliseconds(secs * 1000);
    }
    throw TransportError(TransportError::Kind::kRateLimited, "rate limited (HTTP 429)", retry_after);
  }
  if (res->status == 408 || res->status >= 500) {
    throw TransportError(TransportError::Kind::kTransient, "HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw TransportError(TransportError::Kind::kPermanent,
                         "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_response_body(res->body);
}

}  // namespace polyforge
