#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace zsner {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;  // deterministic decoding by default
  int max_tokens = 0;        // 0: leave to the server

  static ChatRequest user(std::string content) {
    return ChatRequest{{ChatMessage{"user", std::move(content)}}};
  }
};

/// Anything that turns a chat request into generated text. Implementations
/// throw TransportError when no answer could be obtained.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "gpt-3.5-turbo-1106";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 120.0;
  bool require_api_key = true;
};

EndpointConfig endpoint_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EndpointConfig& config);

/// Request body for an OpenAI-style `POST {base_url}/chat/completions`.
nlohmann::json chat_completions_body(const std::string& model, const ChatRequest& request);

/// Pulls `choices[0].message.content` out of a chat-completions response.
/// Throws TransportError when the body does not have that shape.
std::string chat_completions_content(const std::string& response_body);

/// HTTP chat-completions client. The API key is read from the environment
/// variable named in the config; when `require_api_key` is set and the
/// variable is unset the constructor throws ConfigError naming it.
class HttpChatClient : public LlmClient {
 public:
  explicit HttpChatClient(EndpointConfig config);
  ~HttpChatClient() override;

  std::string complete(const ChatRequest& request) override;
  std::string model_id() const override { return config_.model; }

 private:
  EndpointConfig config_;
  std::string api_key_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Sleeps on the calling thread.
Sleeper real_sleeper();

/// Calls `client.complete`, retrying TransportError with exponential backoff.
/// Rethrows the last TransportError once attempts are exhausted.
std::string complete_with_retry(LlmClient& client, const ChatRequest& request,
                                const RetryPolicy& policy, const Sleeper& sleep = real_sleeper());

}  // namespace zsner
