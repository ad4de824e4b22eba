#include "zsner/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include "zsner/errors.hpp"

namespace zsner {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw ConfigError(fmt::format("endpoint base_url '{}' is not an http(s) URL", url));
  }
  std::string prefix = m[2].matched ? m[2].str() : std::string();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

}  // namespace

EndpointConfig endpoint_config_from_json(const nlohmann::json& j) {
  EndpointConfig c;
  if (!j.is_object()) throw ConfigError("'endpoint' must be an object");
  auto str = [&](const char* key, std::string& field) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_string()) throw ConfigError(fmt::format("endpoint.{} must be a string", key));
      field = it->get<std::string>();
    }
  };
  str("base_url", c.base_url);
  str("model", c.model);
  str("api_key_env", c.api_key_env);
  if (auto it = j.find("timeout_seconds"); it != j.end()) {
    if (!it->is_number() || it->get<double>() <= 0) {
      throw ConfigError("endpoint.timeout_seconds must be a positive number");
    }
    c.timeout_seconds = it->get<double>();
  }
  if (auto it = j.find("require_api_key"); it != j.end() && it->is_boolean()) {
    c.require_api_key = it->get<bool>();
  }
  if (j.contains("api_key")) {
    throw ConfigError("API keys are read from the environment only; remove endpoint.api_key");
  }
  return c;
}

nlohmann::json to_json(const EndpointConfig& c) {
  return {{"base_url", c.base_url},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"timeout_seconds", c.timeout_seconds},
          {"require_api_key", c.require_api_key}};
}

nlohmann::json chat_completions_body(const std::string& model, const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  nlohmann::json body{{"model", model}, {"messages", messages}, {"temperature", request.temperature}};
  if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;
  return body;
}

std::string chat_completions_content(const std::string& response_body) {
  auto j = nlohmann::json::parse(response_body, nullptr, false);
  if (j.is_discarded()) throw TransportError("chat-completions response is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(fmt::format("unexpected chat-completions response shape: {}", e.what()));
  }
}

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
  parse_base_url(config_.base_url);
  const char* key = config_.api_key_env.empty() ? nullptr : std::getenv(config_.api_key_env.c_str());
  if (key != nullptr) api_key_ = key;
  if (config_.require_api_key && key == nullptr) {
    throw ConfigError(fmt::format("environment variable {} holding the API key is not set",
                                  config_.api_key_env));
  }
}

HttpChatClient::~HttpChatClient() = default;

std::string HttpChatClient::complete(const ChatRequest& request) {
  auto url = parse_base_url(config_.base_url);
  // One client per request keeps the object usable from several threads.
  httplib::Client cli(url.scheme_host_port);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count() + 1);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto body = chat_completions_body(config_.model, request).dump();
  auto res = cli.Post(url.path_prefix + "/chat/completions", headers, body, "application/json");
  if (!res) {
    throw TransportError(fmt::format("request to {} failed: {}", config_.base_url,
                                     httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(fmt::format("{} answered HTTP {}: {}", config_.base_url, res->status,
                                     res->body.substr(0, 300)));
  }
  return chat_completions_content(res->body);
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string complete_with_retry(LlmClient& client, const ChatRequest& request,
                                const RetryPolicy& policy, const Sleeper& sleep) {
  int attempts = std::max(1, policy.max_attempts);
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return client.complete(request);
    } catch (const TransportError&) {
      if (attempt >= attempts) throw;
      if (sleep) sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(std::llround(backoff.count() * policy.multiplier)));
    }
  }
}

}  // namespace zsner
