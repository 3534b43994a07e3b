#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "moral_lens/prompt.hpp"

namespace moral_lens {

/// Decoding parameters sent with every completion. The defaults are greedy
/// decoding; with sampling disabled the temperature must stay at 0.
struct DecodeConfig {
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 256;
  bool sampling_enabled = false;
  /// Opaque, forwarded as "reasoning_effort" when set.
  std::optional<std::string> reasoning_effort;
  /// Provider-specific knobs, merged into the request body as-is.
  nlohmann::json extra = nlohmann::json::object();

  /// Throws ConfigError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j, std::string_view origin = "<config>");
};

/// sha256 over the canonical {body, config} document.
std::string prompt_hash(std::string_view body, const DecodeConfig& config);

/// Cache key for a completion; attempts after the first get "-retryN".
std::string completion_key(std::string_view hash, int attempt);

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct CompletionRecord {
  std::string backend_id;
  std::string model_id;
  std::string prompt_hash;
  std::string key;
  std::string prompt;
  DecodeConfig decode;
  std::string raw_text;
  std::string timestamp;
  std::optional<TokenUsage> token_usage;

  std::string serialize() const;
  static CompletionRecord parse(std::string_view text, std::string_view origin);
};

struct BackendReply {
  std::string text;
  std::optional<TokenUsage> usage;
};

/// A chat-completion provider. send() may be called from several threads at
/// once, up to max_concurrency().
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& id() const = 0;
  virtual BackendReply send(const std::string& model_id, const std::string& body,
                            const DecodeConfig& config, int attempt) = 0;
  virtual std::size_t max_concurrency() const { return 4; }
};

/// Produces a plausible, deterministic completion for a prompt. PCT prompts
/// get an Output Format answer whose label depends on the model, the prompt
/// and the conditioning direction; judge prompts get a rating.
std::string synthetic_response(const std::string& model_id, const std::string& body, int attempt);

/// Offline backend: responses are looked up by prompt hash, falling back to a
/// responder function when the hash is not scripted.
class ScriptedBackend final : public Backend {
 public:
  using Responder = std::function<std::string(const std::string& model_id, const std::string& body,
                                              int attempt)>;

  explicit ScriptedBackend(std::string id, Responder fallback = synthetic_response,
                           std::size_t max_concurrency = 4);

  void script(const std::string& prompt_hash, std::string text);

  const std::string& id() const override { return id_; }
  BackendReply send(const std::string& model_id, const std::string& body,
                    const DecodeConfig& config, int attempt) override;
  std::size_t max_concurrency() const override { return max_concurrency_; }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string id_;
  Responder fallback_;
  std::size_t max_concurrency_;
  std::mutex mutex_;
  std::map<std::string, std::string> scripted_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendOptions {
  std::string id;
  /// scheme://host[:port]
  std::string base_url;
  std::string path = "/v1/chat/completions";
  /// Name of the environment variable holding the bearer token; empty = none.
  std::string api_key_env;
  std::chrono::seconds timeout{120};
  std::size_t max_concurrency = 4;
};

/// OpenAI-compatible chat-completions client. The prompt goes out as a single
/// user message; there is no system prompt.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(HttpBackendOptions options);

  const std::string& id() const override { return options_.id; }
  BackendReply send(const std::string& model_id, const std::string& body,
                    const DecodeConfig& config, int attempt) override;
  std::size_t max_concurrency() const override { return options_.max_concurrency; }

  /// The JSON request body that send() posts.
  static nlohmann::json request_body(const std::string& model_id, const std::string& body,
                                     const DecodeConfig& config);

 private:
  HttpBackendOptions options_;
};

/// Completion records on disk, one file per key under
/// <root>/<backend>/<model>/. Without a root the cache lives in memory.
/// The first record stored under a key wins; later puts return it unchanged.
class ReplayCache {
 public:
  explicit ReplayCache(std::optional<std::filesystem::path> root = std::nullopt);

  std::optional<CompletionRecord> get(const std::string& backend_id, const std::string& model_id,
                                      const std::string& key);
  CompletionRecord put(CompletionRecord record);

  std::optional<std::filesystem::path> record_path(const std::string& backend_id,
                                                   const std::string& model_id,
                                                   const std::string& key) const;

 private:
  std::optional<std::filesystem::path> root_;
  std::mutex mutex_;
  std::map<std::string, CompletionRecord> memory_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

enum class GatewayMode { live, replay };

/// Uniform completion entry point. Live mode answers from the cache when it
/// can and otherwise calls the backend and stores the record before
/// returning; replay mode never calls a backend.
class ModelGateway {
 public:
  ModelGateway(GatewayMode mode, std::shared_ptr<ReplayCache> cache, RetryPolicy retry = {});

  void add_backend(std::shared_ptr<Backend> backend);
  Backend& backend(std::string_view id) const;
  GatewayMode mode() const { return mode_; }

  CompletionRecord complete_record(const std::string& backend_id, const std::string& model_id,
                                   const PromptText& prompt, const DecodeConfig& config,
                                   int attempt = 0);
  std::string complete(const std::string& backend_id, const std::string& model_id,
                       const PromptText& prompt, const DecodeConfig& config, int attempt = 0);

  /// Backend send() calls issued so far, failed ones included.
  std::size_t backend_calls() const { return backend_calls_.load(); }

 private:
  struct Slot {
    std::shared_ptr<Backend> backend;
    std::unique_ptr<std::counting_semaphore<1024>> in_flight;
  };

  BackendReply send_with_retry(Slot& slot, const std::string& model_id, const std::string& body,
                               const DecodeConfig& config, int attempt);

  GatewayMode mode_;
  std::shared_ptr<ReplayCache> cache_;
  RetryPolicy retry_;
  std::map<std::string, Slot, std::less<>> backends_;
  std::atomic<std::size_t> backend_calls_{0};
};

}  // namespace moral_lens
