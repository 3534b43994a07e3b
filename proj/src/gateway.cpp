#include "moral_lens/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "json_fields.hpp"
#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

void DecodeConfig::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0) {
    throw ConfigError("temperature must be a finite value >= 0");
  }
  if (!std::isfinite(top_p) || top_p <= 0.0 || top_p > 1.0) {
    throw ConfigError("top_p must lie in (0, 1]");
  }
  if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (!sampling_enabled && temperature != 0.0) {
    throw ConfigError("temperature must be 0 when sampling is disabled");
  }
  if (!extra.is_object()) throw ConfigError("decode.extra must be an object");
}

nlohmann::ordered_json DecodeConfig::to_json() const {
  nlohmann::ordered_json j;
  j["temperature"] = temperature;
  j["top_p"] = top_p;
  j["max_tokens"] = max_tokens;
  j["sampling_enabled"] = sampling_enabled;
  if (reasoning_effort) j["reasoning_effort"] = *reasoning_effort;
  // nlohmann::json keeps object keys sorted, so this is canonical too.
  if (!extra.empty()) j["extra"] = nlohmann::ordered_json::parse(extra.dump());
  return j;
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j, std::string_view origin) {
  detail::require_object<ConfigError>(j, "decode", origin);
  detail::allow_keys<ConfigError>(
      j, {"temperature", "top_p", "max_tokens", "sampling_enabled", "reasoning_effort", "extra"},
      "decode", origin);
  DecodeConfig c;
  if (j.contains("temperature")) c.temperature = detail::require_number<ConfigError>(j, "temperature", "decode", origin);
  if (j.contains("top_p")) c.top_p = detail::require_number<ConfigError>(j, "top_p", "decode", origin);
  if (j.contains("max_tokens")) {
    if (!j["max_tokens"].is_number_integer()) throw ConfigError(std::string(origin) + ": decode.max_tokens must be an integer");
    c.max_tokens = j["max_tokens"].get<int>();
  }
  if (j.contains("sampling_enabled")) {
    if (!j["sampling_enabled"].is_boolean()) throw ConfigError(std::string(origin) + ": decode.sampling_enabled must be a boolean");
    c.sampling_enabled = j["sampling_enabled"].get<bool>();
  }
  if (j.contains("reasoning_effort")) {
    c.reasoning_effort = detail::require_string<ConfigError>(j, "reasoning_effort", "decode", origin);
  }
  if (j.contains("extra")) c.extra = j["extra"];
  c.validate();
  return c;
}

std::string prompt_hash(std::string_view body, const DecodeConfig& config) {
  nlohmann::ordered_json doc;
  doc["body"] = std::string(body);
  doc["config"] = config.to_json();
  return sha256_hex(doc.dump());
}

std::string completion_key(std::string_view hash, int attempt) {
  std::string key(hash);
  if (attempt > 0) key += "-retry" + std::to_string(attempt);
  return key;
}

std::string CompletionRecord::serialize() const {
  nlohmann::ordered_json j;
  j["backend_id"] = backend_id;
  j["model_id"] = model_id;
  j["prompt_hash"] = prompt_hash;
  j["key"] = key;
  j["decode"] = decode.to_json();
  j["prompt"] = prompt;
  j["raw_text"] = raw_text;
  j["timestamp"] = timestamp;
  if (token_usage) {
    j["token_usage"] = {{"prompt_tokens", token_usage->prompt_tokens},
                        {"completion_tokens", token_usage->completion_tokens}};
  } else {
    j["token_usage"] = nullptr;
  }
  return j.dump(2) + "\n";
}

CompletionRecord CompletionRecord::parse(std::string_view text, std::string_view origin) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(std::string(origin) + ": completion record is not JSON");
  detail::require_object<SchemaError>(j, "completion record", origin);
  CompletionRecord r;
  r.backend_id = detail::require_string<SchemaError>(j, "backend_id", "record", origin);
  r.model_id = detail::require_string<SchemaError>(j, "model_id", "record", origin);
  r.prompt_hash = detail::require_string<SchemaError>(j, "prompt_hash", "record", origin);
  r.key = detail::require_string<SchemaError>(j, "key", "record", origin);
  r.prompt = detail::require_string<SchemaError>(j, "prompt", "record", origin, true);
  r.raw_text = detail::require_string<SchemaError>(j, "raw_text", "record", origin, true);
  r.timestamp = detail::require_string<SchemaError>(j, "timestamp", "record", origin, true);
  try {
    r.decode = DecodeConfig::from_json(detail::require_field<SchemaError>(j, "decode", "record", origin), origin);
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
  const auto& usage = j.value("token_usage", nlohmann::json());
  if (usage.is_object()) {
    r.token_usage = TokenUsage{usage.value("prompt_tokens", 0L), usage.value("completion_tokens", 0L)};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic responses

namespace {

// +1 for endorsement conditioning, -1 for rejection, 0 for base prompts.
int conditioning_direction(std::string_view body) {
  if (body.find("strongly endorses") != std::string_view::npos) return 1;
  if (body.find("strongly rejects") != std::string_view::npos) return -1;
  constexpr std::string_view kMarker = " — Answer: ";
  int score = 0;
  for (auto pos = body.find(kMarker); pos != std::string_view::npos;
       pos = body.find(kMarker, pos + 1)) {
    const auto start = pos + kMarker.size();
    const auto end = body.find('\n', start);
    const auto label = body.substr(start, end == std::string_view::npos ? end : end - start);
    if (label == "agree" || label == "appropriate" || label == "relevant") ++score;
    else if (label == "disagree" || label == "inappropriate" || label == "not relevant") --score;
  }
  return (score > 0) - (score < 0);
}

}  // namespace

std::string synthetic_response(const std::string& model_id, const std::string& body, int attempt) {
  const std::uint64_t h = sha256_prefix64(model_id + "\n" + std::to_string(attempt) + "\n" + body);
  const std::string tag = sha256_hex(model_id + "\n" + body).substr(0, 8);
  if (body.find("Return an integer rating 1-5") != std::string::npos) {
    return "```json\n{\"rating\": " + std::to_string(1 + (h >> 16) % 5) + "}\n```";
  }
  // A model-level lean keeps the unconditioned answers from being pure noise.
  const int lean = static_cast<int>(sha256_prefix64(model_id) % 3) - 1;
  int label = 1 + static_cast<int>(h % 4);
  if ((h >> 8) % 3 == 0) label += lean;
  const int dir = conditioning_direction(body);
  if (dir != 0 && (h >> 12) % 2 == 0) label += dir;
  label = std::clamp(label, 1, 4);
  static constexpr const char* kWords[] = {"Strongly disagree", "Disagree", "Agree", "Strongly agree"};
  return "```json\n{\n  \"Opinion\": \"" + std::to_string(label) + ") " + kWords[label - 1] +
         "\",\n  \"Brief Reason\": \"Synthetic rationale " + tag + ".\"\n}\n```";
}

ScriptedBackend::ScriptedBackend(std::string id, Responder fallback, std::size_t max_concurrency)
    : id_(std::move(id)), fallback_(std::move(fallback)), max_concurrency_(max_concurrency) {}

void ScriptedBackend::script(const std::string& hash, std::string text) {
  std::lock_guard lock(mutex_);
  scripted_[hash] = std::move(text);
}

BackendReply ScriptedBackend::send(const std::string& model_id, const std::string& body,
                                   const DecodeConfig& config, int attempt) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    auto it = scripted_.find(prompt_hash(body, config));
    if (it != scripted_.end()) return {it->second, std::nullopt};
  }
  if (!fallback_) {
    throw TransportError("scripted backend '" + id_ + "' has no response for this prompt", false);
  }
  return {fallback_(model_id, body, attempt), std::nullopt};
}

// ---------------------------------------------------------------------------
// Replay cache

ReplayCache::ReplayCache(std::optional<std::filesystem::path> root) : root_(std::move(root)) {}

std::optional<std::filesystem::path> ReplayCache::record_path(const std::string& backend_id,
                                                              const std::string& model_id,
                                                              const std::string& key) const {
  if (!root_) return std::nullopt;
  // Sanitizing can merge distinct model ids, so the directory also carries a
  // digest of the raw id.
  const auto model_dir = sanitize_component(model_id) + "-" + sha256_hex(model_id).substr(0, 8);
  return *root_ / sanitize_component(backend_id) / model_dir / (key + ".json");
}

std::optional<CompletionRecord> ReplayCache::get(const std::string& backend_id,
                                                 const std::string& model_id,
                                                 const std::string& key) {
  const std::string mem_key = backend_id + "\n" + model_id + "\n" + key;
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(mem_key); it != memory_.end()) return it->second;
  const auto path = record_path(backend_id, model_id, key);
  if (!path || !std::filesystem::exists(*path)) return std::nullopt;
  auto record = CompletionRecord::parse(read_text_file(*path), path->string());
  memory_.emplace(mem_key, record);
  return record;
}

CompletionRecord ReplayCache::put(CompletionRecord record) {
  const std::string mem_key = record.backend_id + "\n" + record.model_id + "\n" + record.key;
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(mem_key); it != memory_.end()) return it->second;
  const auto path = record_path(record.backend_id, record.model_id, record.key);
  if (path) {
    if (std::filesystem::exists(*path)) {
      auto existing = CompletionRecord::parse(read_text_file(*path), path->string());
      memory_.emplace(mem_key, existing);
      return existing;
    }
    write_text_file_atomic(*path, record.serialize());
  }
  memory_.emplace(mem_key, record);
  return record;
}

// ---------------------------------------------------------------------------
// Gateway

ModelGateway::ModelGateway(GatewayMode mode, std::shared_ptr<ReplayCache> cache, RetryPolicy retry)
    : mode_(mode), cache_(std::move(cache)), retry_(retry) {
  if (!cache_) cache_ = std::make_shared<ReplayCache>();
  if (retry_.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
}

void ModelGateway::add_backend(std::shared_ptr<Backend> backend) {
  const auto& id = backend->id();
  if (backends_.contains(id)) throw DuplicateIdError("backend '" + id + "' registered twice");
  const auto slots = static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(backend->max_concurrency(), 1, 1024));
  Slot slot{std::move(backend), std::make_unique<std::counting_semaphore<1024>>(slots)};
  backends_.emplace(id, std::move(slot));
}

Backend& ModelGateway::backend(std::string_view id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) throw ConfigError("unknown backend '" + std::string(id) + "'");
  return *it->second.backend;
}

BackendReply ModelGateway::send_with_retry(Slot& slot, const std::string& model_id,
                                           const std::string& body, const DecodeConfig& config,
                                           int attempt) {
  auto backoff = retry_.initial_backoff;
  for (int i = 1;; ++i) {
    try {
      slot.in_flight->acquire();
      struct Release {
        std::counting_semaphore<1024>* s;
        ~Release() { s->release(); }
      } release{slot.in_flight.get()};
      ++backend_calls_;
      return slot.backend->send(model_id, body, config, attempt);
    } catch (const RateLimitError& e) {
      if (i >= retry_.max_attempts) throw;
      spdlog::warn("{} rate limited ({}), retry {}/{}", slot.backend->id(), e.what(), i,
                   retry_.max_attempts - 1);
    } catch (const TransportError& e) {
      if (!e.retryable() || i >= retry_.max_attempts) throw;
      spdlog::warn("{} transport error ({}), retry {}/{}", slot.backend->id(), e.what(), i,
                   retry_.max_attempts - 1);
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
  }
}

CompletionRecord ModelGateway::complete_record(const std::string& backend_id,
                                               const std::string& model_id,
                                               const PromptText& prompt,
                                               const DecodeConfig& config, int attempt) {
  auto it = backends_.find(backend_id);
  if (it == backends_.end()) throw ConfigError("unknown backend '" + backend_id + "'");
  const auto hash = prompt_hash(prompt.body, config);
  const auto key = completion_key(hash, attempt);
  if (auto hit = cache_->get(backend_id, model_id, key)) return *hit;
  if (mode_ == GatewayMode::replay) {
    throw CacheMissError("no cached completion " + key + " for " + backend_id + "/" + model_id);
  }
  auto reply = send_with_retry(it->second, model_id, prompt.body, config, attempt);
  CompletionRecord record;
  record.backend_id = backend_id;
  record.model_id = model_id;
  record.prompt_hash = hash;
  record.key = key;
  record.prompt = prompt.body;
  record.decode = config;
  record.raw_text = std::move(reply.text);
  record.timestamp = utc_timestamp();
  record.token_usage = reply.usage;
  return cache_->put(std::move(record));
}

std::string ModelGateway::complete(const std::string& backend_id, const std::string& model_id,
                                   const PromptText& prompt, const DecodeConfig& config,
                                   int attempt) {
  return complete_record(backend_id, model_id, prompt, config, attempt).raw_text;
}

}  // namespace moral_lens
