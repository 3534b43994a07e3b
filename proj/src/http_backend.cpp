#include <cstdlib>

#include <httplib.h>

#include "moral_lens/errors.hpp"
#include "moral_lens/gateway.hpp"

namespace moral_lens {

HttpChatBackend::HttpChatBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.id.empty()) throw ConfigError("http backend needs an id");
  if (options_.base_url.rfind("http://", 0) != 0 && options_.base_url.rfind("https://", 0) != 0) {
    throw ConfigError("backend '" + options_.id + "': base_url must start with http:// or https://");
  }
  if (options_.max_concurrency == 0) options_.max_concurrency = 1;
}

nlohmann::json HttpChatBackend::request_body(const std::string& model_id, const std::string& body,
                                             const DecodeConfig& config) {
  nlohmann::json req;
  req["model"] = model_id;
  req["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", body}}});
  req["temperature"] = config.temperature;
  req["top_p"] = config.top_p;
  req["max_tokens"] = config.max_tokens;
  if (config.reasoning_effort) req["reasoning_effort"] = *config.reasoning_effort;
  for (auto it = config.extra.begin(); it != config.extra.end(); ++it) req[it.key()] = it.value();
  return req;
}

BackendReply HttpChatBackend::send(const std::string& model_id, const std::string& body,
                                   const DecodeConfig& config, int /*attempt*/) {
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);

  httplib::Headers headers;
  if (!options_.api_key_env.empty()) {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw TransportError("environment variable " + options_.api_key_env + " is not set", false);
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto payload = request_body(model_id, body, config).dump();
  auto res = client.Post(options_.path, headers, payload, "application/json");
  if (!res) {
    throw TransportError(options_.id + ": " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429) throw RateLimitError(options_.id + ": HTTP 429");
  if (res->status >= 500) {
    throw TransportError(options_.id + ": HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw TransportError(options_.id + ": HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200),
                         false);
  }

  auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw TransportError(options_.id + ": response is not a JSON object", false);
  }
  const auto choices = doc.value("choices", nlohmann::json::array());
  if (!choices.is_array() || choices.empty() || !choices[0].is_object()) {
    throw TransportError(options_.id + ": response has no choices", false);
  }
  const auto& choice = choices[0];
  if (choice.value("finish_reason", std::string()) == "content_filter") {
    throw BackendRefusalError(options_.id + ": completion withheld by content filter");
  }
  const auto message = choice.value("message", nlohmann::json::object());
  if (!message.is_object()) throw TransportError(options_.id + ": malformed message", false);
  if (message.contains("refusal") && message["refusal"].is_string() &&
      !message["refusal"].get<std::string>().empty()) {
    throw BackendRefusalError(options_.id + ": " + message["refusal"].get<std::string>());
  }
  if (!message.contains("content") || !message["content"].is_string()) {
    throw TransportError(options_.id + ": message has no text content", false);
  }

  BackendReply reply;
  reply.text = message["content"].get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const auto& u = doc["usage"];
    reply.usage = TokenUsage{u.value("prompt_tokens", 0L), u.value("completion_tokens", 0L)};
  }
  return reply;
}

}  // namespace moral_lens
