#include "cbtsim/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

// httplib pulls in OpenSSL only when requested; plain HTTP is enough here.
#include <httplib.h>

namespace cbtsim {

const char* role_name(ChatRole r) {
  switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "?";
}

void EndpointConfig::validate() const {
  if (base_url.empty())
    throw GatewayError(GatewayErrorKind::Config, "endpoint '" + name + "' has no base_url");
  if (timeout_s <= 0)
    throw GatewayError(GatewayErrorKind::Config, "endpoint '" + name + "' timeout must be > 0");
  if (max_retries < 0 || max_retries > 10)
    throw GatewayError(GatewayErrorKind::Config,
                       "endpoint '" + name + "' max_retries must be in 0..10");
  if (temperature < 0)
    throw GatewayError(GatewayErrorKind::Config, "endpoint '" + name + "' temperature must be >= 0");
  if (max_tokens <= 0)
    throw GatewayError(GatewayErrorKind::Config, "endpoint '" + name + "' max_tokens must be > 0");
}

void to_json(nlohmann::json& j, const EndpointConfig& e) {
  j = nlohmann::json{{"name", e.name},
                     {"base_url", e.base_url},
                     {"model_id", e.model_id},
                     {"api_key_env", e.api_key_env},
                     {"temperature", e.temperature},
                     {"max_tokens", e.max_tokens},
                     {"timeout_s", e.timeout_s},
                     {"max_retries", e.max_retries},
                     {"backoff_base_s", e.backoff_base_s}};
}

void from_json(const nlohmann::json& j, EndpointConfig& e) {
  e.name = j.value("name", "");
  j.at("base_url").get_to(e.base_url);
  e.model_id = j.value("model_id", "");
  e.api_key_env = j.value("api_key_env", "");
  e.temperature = j.value("temperature", 0.0);
  e.max_tokens = j.value("max_tokens", 2048);
  e.timeout_s = j.value("timeout_s", 120.0);
  e.max_retries = j.value("max_retries", 3);
  e.backoff_base_s = j.value("backoff_base_s", 0.5);
}

std::string render_template(const PromptTemplate& t,
                            const std::map<std::string, std::string>& vars) {
  for (const auto& v : t.required_vars) {
    if (!vars.count(v))
      throw GatewayError(GatewayErrorKind::Template,
                         "template '" + t.template_id + "' is missing variable '" + v + "'");
  }
  std::string out;
  out.reserve(t.body.size());
  for (std::size_t i = 0; i < t.body.size(); ++i) {
    char c = t.body[i];
    if (c == '{' && i + 1 < t.body.size() && t.body[i + 1] == '{') {
      out += '{';
      ++i;
    } else if (c == '}' && i + 1 < t.body.size() && t.body[i + 1] == '}') {
      out += '}';
      ++i;
    } else if (c == '{') {
      std::size_t end = t.body.find('}', i);
      if (end == std::string::npos)
        throw GatewayError(GatewayErrorKind::Template,
                           "template '" + t.template_id + "' has an unterminated placeholder");
      std::string name = t.body.substr(i + 1, end - i - 1);
      auto it = vars.find(name);
      if (it == vars.end())
        throw GatewayError(GatewayErrorKind::Template,
                           "template '" + t.template_id + "' is missing variable '" + name + "'");
      out += it->second;
      i = end;
    } else {
      out += c;
    }
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

nlohmann::json request_body(const EndpointConfig& e, const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages)
    msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  return nlohmann::json{{"model", e.model_id},
                        {"messages", msgs},
                        {"temperature", e.temperature},
                        {"max_tokens", e.max_tokens}};
}

}  // namespace

ChatClient::ChatClient(std::filesystem::path cache_dir) : cache_dir_(std::move(cache_dir)) {
  if (!cache_dir_.empty()) std::filesystem::create_directories(cache_dir_);
}

std::string ChatClient::cache_key(const EndpointConfig& endpoint,
                                  const std::vector<ChatMessage>& messages) const {
  std::string canon = request_body(endpoint, messages).dump();
  // Two passes with different suffixes give a 128-bit key; FNV alone is a
  // little short for content addressing.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)),
                static_cast<unsigned long long>(fnv1a64(canon + "#2")));
  return buf;
}

std::optional<CompletionResult> ChatClient::cache_lookup(const std::string& key) const {
  if (cache_dir_.empty()) return std::nullopt;
  std::ifstream in(cache_dir_ / (key + ".json"));
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // corrupt entry behaves like a miss
  }
  CompletionResult r;
  r.text = j.at("response").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", 0);
  r.completion_tokens = j.value("completion_tokens", 0);
  r.from_cache = true;
  r.attempts = 0;
  return r;
}

void ChatClient::cache_store(const std::string& key, const EndpointConfig& endpoint,
                             const std::vector<ChatMessage>& messages,
                             const CompletionResult& r) const {
  if (cache_dir_.empty()) return;
  nlohmann::json j{{"request", request_body(endpoint, messages)},
                   {"response", r.text},
                   {"prompt_tokens", r.prompt_tokens},
                   {"completion_tokens", r.completion_tokens}};
  // Atomic append-only write: temp file then rename; existing entries win.
  auto final_path = cache_dir_ / (key + ".json");
  if (std::filesystem::exists(final_path)) return;
  auto tmp = cache_dir_ / (key + ".tmp");
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
}

CompletionResult ChatClient::complete(const EndpointConfig& endpoint,
                                      const std::vector<ChatMessage>& messages,
                                      CacheMode cache_mode) const {
  endpoint.validate();
  for (const auto& m : messages) {
    std::size_t a = m.content.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
      throw GatewayError(GatewayErrorKind::Config, "empty chat message content");
  }
  std::string key = cache_key(endpoint, messages);
  if (cache_mode == CacheMode::use) {
    if (auto hit = cache_lookup(key)) return *hit;
  }
  CompletionResult r;
  if (endpoint.is_stub()) {
    r.text = stub_respond(endpoint, messages);
    r.attempts = 1;
  } else {
    r = complete_http(endpoint, messages);
  }
  cache_store(key, endpoint, messages, r);
  return r;
}

CompletionResult ChatClient::complete_http(const EndpointConfig& endpoint,
                                           const std::vector<ChatMessage>& messages) const {
  // Split "scheme://host[:port]" from an optional path prefix.
  std::string url = endpoint.base_url;
  std::string base = url, prefix;
  std::size_t scheme_end = url.find("://");
  if (scheme_end != std::string::npos) {
    std::size_t slash = url.find('/', scheme_end + 3);
    if (slash != std::string::npos) {
      base = url.substr(0, slash);
      prefix = url.substr(slash);
      if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
  }
  std::string path = prefix + "/v1/chat/completions";

  httplib::Client cli(base);
  cli.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(endpoint.timeout_s * 1000)));
  cli.set_read_timeout(std::chrono::milliseconds(static_cast<int>(endpoint.timeout_s * 1000)));
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  std::string body = request_body(endpoint, messages).dump();

  std::string last_error = "no attempt made";
  GatewayErrorKind last_kind = GatewayErrorKind::Transport;
  int attempts = 0;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = endpoint.backoff_base_s * std::pow(2.0, attempt - 1);
      delay = std::min(delay, 60.0);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++attempts;
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        last_kind = GatewayErrorKind::Timeout;
        last_error = "timeout contacting " + endpoint.base_url;
      } else {
        last_kind = GatewayErrorKind::Transport;
        last_error = "transport failure contacting " + endpoint.base_url + ": " +
                     httplib::to_string(err);
      }
      continue;
    }
    if (res->status == 429) {
      last_kind = GatewayErrorKind::RateLimit;
      last_error = "rate limited by " + endpoint.base_url;
      continue;
    }
    if (res->status >= 500) {
      last_kind = GatewayErrorKind::Transport;
      last_error = "server error " + std::to_string(res->status) + " from " + endpoint.base_url;
      continue;
    }
    if (res->status != 200)
      throw GatewayError(GatewayErrorKind::Transport,
                         "unexpected status " + std::to_string(res->status) + " from " +
                             endpoint.base_url);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
      CompletionResult r;
      r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        r.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
      r.attempts = attempts;
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(GatewayErrorKind::MalformedResponse,
                         std::string("malformed completion response: ") + e.what());
    }
  }
  throw GatewayError(last_kind, last_error + " after " + std::to_string(attempts) + " attempts");
}

}  // namespace cbtsim
