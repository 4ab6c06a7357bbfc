#pragma once
// Uniform client for /v1/chat/completions endpoints with retries, exponential
// backoff, prompt templating and a content-addressed disk cache.
//
// URLs with the scheme "stub://" are served by in-process scripted responders
// (see stubs.cpp), which keeps the whole pipeline runnable offline.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cbtsim {

enum class ChatRole { system, user, assistant };

const char* role_name(ChatRole r);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;  // non-empty after trimming

  bool operator==(const ChatMessage&) const = default;
};

struct EndpointConfig {
  std::string name;
  std::string base_url;
  std::string model_id;
  std::string api_key_env;  // environment variable holding the secret
  double temperature = 0.0;
  int max_tokens = 2048;
  double timeout_s = 120.0;
  int max_retries = 3;  // <= 10
  double backoff_base_s = 0.5;

  void validate() const;
  bool is_stub() const { return base_url.rfind("stub://", 0) == 0; }
};

void to_json(nlohmann::json& j, const EndpointConfig& e);
void from_json(const nlohmann::json& j, EndpointConfig& e);

struct PromptTemplate {
  std::string template_id;
  std::string body;  // named {placeholders}
  std::vector<std::string> required_vars;
};

enum class GatewayErrorKind { Transport, RateLimit, Timeout, MalformedResponse, Template, Config };

struct GatewayError : std::runtime_error {
  GatewayErrorKind kind;
  GatewayError(GatewayErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Substitutes every {name} in the body. Errors name the missing variable or
// the unknown placeholder. "{{" / "}}" escape literal braces.
std::string render_template(const PromptTemplate& t,
                            const std::map<std::string, std::string>& vars);

enum class CacheMode { use, bypass };

struct CompletionResult {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  int attempts = 0;  // network attempts made; 0 on a cache hit
  bool from_cache = false;
};

// 64-bit FNV-1a, used for cache keys and stub fingerprints.
std::uint64_t fnv1a64(const std::string& data);

class ChatClient {
 public:
  // cache_dir empty disables the disk cache.
  explicit ChatClient(std::filesystem::path cache_dir = {});

  CompletionResult complete(const EndpointConfig& endpoint,
                            const std::vector<ChatMessage>& messages,
                            CacheMode cache_mode = CacheMode::use) const;

  // Cache key: content hash of (model_id, messages, temperature, max_tokens).
  std::string cache_key(const EndpointConfig& endpoint,
                        const std::vector<ChatMessage>& messages) const;

 private:
  std::filesystem::path cache_dir_;

  std::optional<CompletionResult> cache_lookup(const std::string& key) const;
  void cache_store(const std::string& key, const EndpointConfig& endpoint,
                   const std::vector<ChatMessage>& messages, const CompletionResult& r) const;
  CompletionResult complete_http(const EndpointConfig& endpoint,
                                 const std::vector<ChatMessage>& messages) const;
};

// Scripted offline responder behind "stub://" URLs.
std::string stub_respond(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages);

}  // namespace cbtsim
