#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "halo/errors.hpp"
#include "halo/text.hpp"

namespace halo {

// ---------------------------------------------------------------------------
// Completion data model
// ---------------------------------------------------------------------------

struct GenerationParams {
  int max_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  bool logprobs_requested = true;

  void validate() const {
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
      throw ConfigError("temperature must be finite and >= 0");
  }
};

struct TokenLogprob {
  std::string token_text;
  double probability = 0.0;  // in [0,1]
};

enum class FinishReason { stop, length, backend_end };

inline std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::backend_end: return "backend_end";
  }
  return "backend_end";
}

inline FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  return FinishReason::backend_end;
}

// One backend reply. When logprobs were requested the tokens concatenate to
// exactly `text`; otherwise `tokens` is empty.
struct Completion {
  std::string text;
  std::vector<TokenLogprob> tokens;
  FinishReason finish_reason = FinishReason::stop;
};

// Hosted APIs expose the chosen token's log-probability; exponentiation
// recovers the softmax probability. Values are clamped into [0,1] so a
// malformed positive logprob cannot escape the probability range.
inline double probability_from_logprob(double logprob) {
  return std::min(1.0, std::exp(logprob));
}

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;

  // Throws BackendUnreachable / MalformedResponse / ScriptExhausted.
  virtual Completion complete(const std::string& prompt,
                              const GenerationParams& params) const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

// Deterministic replay backend. Responses are keyed on the exact prompt
// string after trimming trailing whitespace; entries registered under the
// same key are consumed in registration order.
class ScriptedBackend : public CompletionBackend {
 public:
  struct Entry {
    std::string text;
    std::vector<TokenLogprob> tokens;
    FinishReason finish_reason = FinishReason::stop;
  };

  ScriptedBackend() = default;

  ScriptedBackend(ScriptedBackend&& other) noexcept {
    std::lock_guard<std::mutex> lock(other.mutex_);
    script_ = std::move(other.script_);
  }

  ScriptedBackend& operator=(ScriptedBackend&& other) noexcept {
    if (this != &other) {
      std::scoped_lock lock(mutex_, other.mutex_);
      script_ = std::move(other.script_);
    }
    return *this;
  }

  void add_entry(std::string_view prompt, Entry entry) {
    check_entry(entry);
    script_[key(prompt)].push_back(std::move(entry));
  }

  // Convenience: register a reply as a single token with probability 1.
  void add_reply(std::string_view prompt, std::string_view reply) {
    Entry e;
    e.text = std::string(reply);
    if (!reply.empty()) e.tokens.push_back({std::string(reply), 1.0});
    add_entry(prompt, std::move(e));
  }

  // Script file: JSON array of {"prompt", "text", "tokens": [[text, p], ...]}
  // with an optional "finish" field.
  static ScriptedBackend from_json(const nlohmann::json& doc) {
    if (!doc.is_array())
      throw MalformedResponse("script must be a JSON array");
    ScriptedBackend backend;
    for (const auto& item : doc) {
      Entry e;
      e.text = item.at("text").get<std::string>();
      if (item.contains("tokens")) {
        for (const auto& tok : item.at("tokens")) {
          e.tokens.push_back(
              {tok.at(0).get<std::string>(), tok.at(1).get<double>()});
        }
      } else {
        e.tokens.push_back({e.text, 1.0});
      }
      if (item.contains("finish"))
        e.finish_reason =
            finish_reason_from_string(item.at("finish").get<std::string>());
      backend.add_entry(item.at("prompt").get<std::string>(), std::move(e));
    }
    return backend;
  }

  static ScriptedBackend from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponse("script file " + path + ": " + e.what());
    }
    return from_json(doc);
  }

  Completion complete(const std::string& prompt,
                      const GenerationParams& params) const override {
    params.validate();
    if (prompt.empty()) throw ConfigError("prompt must be non-empty");
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = script_.find(key(prompt));
    if (it == script_.end() || it->second.empty())
      throw ScriptExhausted("no scripted reply for prompt: " +
                            truncate_for_error(prompt));
    Entry entry = it->second.front();
    it->second.pop_front();
    Completion c;
    c.text = entry.text;
    c.finish_reason = entry.finish_reason;
    if (params.logprobs_requested) c.tokens = std::move(entry.tokens);
    return c;
  }

 private:
  static std::string key(std::string_view prompt) {
    return std::string(text::trim_right(prompt));
  }

  static void check_entry(const Entry& entry) {
    std::string concat;
    for (const auto& t : entry.tokens) {
      if (t.token_text.empty())
        throw MalformedResponse("scripted token with empty text");
      if (t.probability < 0.0 || t.probability > 1.0)
        throw MalformedResponse("scripted token probability outside [0,1]");
      concat += t.token_text;
    }
    if (concat != entry.text)
      throw MalformedResponse(
          "scripted tokens do not concatenate to the reply text: " +
          truncate_for_error(entry.text));
  }

  static std::string truncate_for_error(std::string_view s) {
    constexpr std::size_t limit = 120;
    if (s.size() <= limit) return std::string(s);
    return std::string(s.substr(0, limit)) + "...";
  }

  mutable std::mutex mutex_;
  mutable std::map<std::string, std::deque<Entry>> script_;
};

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

inline constexpr const char* kLlmApiKeyEnvVar = "HALO_LLM_API_KEY";

struct HttpBackendConfig {
  std::string base_url;                       // e.g. http://127.0.0.1:8080
  std::string completion_path = "/v1/completions";
  int timeout_seconds = 60;
};

// Client for a completion endpoint that accepts
//   {"prompt", "max_tokens", "temperature", "logprobs", "stop"}
// and replies with
//   {"choices": [{"text", "finish_reason",
//                 "logprobs": {"tokens": [...], "token_logprobs": [...]}}]}.
// The bearer token is read from HALO_LLM_API_KEY if set.
class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
      throw ConfigError("http backend requires a base URL");
    if (const char* key = std::getenv(kLlmApiKeyEnvVar)) api_key_ = key;
  }

  Completion complete(const std::string& prompt,
                      const GenerationParams& params) const override {
    params.validate();
    if (prompt.empty()) throw ConfigError("prompt must be non-empty");

    nlohmann::json request = {
        {"prompt", prompt},
        {"max_tokens", params.max_tokens},
        {"temperature", params.temperature},
        {"logprobs", params.logprobs_requested},
    };
    if (!params.stop_sequences.empty()) request["stop"] = params.stop_sequences;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(config_.completion_path, headers, request.dump(),
                           "application/json");
    if (!res)
      throw BackendUnreachable("completion request to " + config_.base_url +
                               " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw BackendUnreachable("completion endpoint returned HTTP " +
                               std::to_string(res->status));
    return parse_completion(res->body, params.logprobs_requested);
  }

  static Completion parse_completion(const std::string& body,
                                     bool logprobs_requested) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponse(std::string("completion body is not JSON: ") +
                              e.what());
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty())
      throw MalformedResponse("completion response has no choices");
    const auto& choice = doc["choices"][0];
    if (!choice.contains("text"))
      throw MalformedResponse("completion choice has no text");

    Completion c;
    c.text = choice["text"].get<std::string>();
    c.finish_reason = finish_reason_from_string(
        choice.value("finish_reason", std::string("backend_end")));
    if (!logprobs_requested) return c;

    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
      throw MalformedResponse("logprobs requested but missing from response");
    const auto& lp = choice["logprobs"];
    if (!lp.contains("tokens") || !lp.contains("token_logprobs"))
      throw MalformedResponse("logprobs block missing tokens/token_logprobs");
    const auto& toks = lp["tokens"];
    const auto& vals = lp["token_logprobs"];
    if (toks.size() != vals.size())
      throw MalformedResponse("tokens and token_logprobs length mismatch");
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (vals[i].is_null())
        throw MalformedResponse("null token logprob at index " +
                                std::to_string(i));
      c.tokens.push_back({toks[i].get<std::string>(),
                          probability_from_logprob(vals[i].get<double>())});
    }
    std::string concat;
    for (const auto& t : c.tokens) concat += t.token_text;
    if (concat != c.text)
      throw MalformedResponse("tokens do not concatenate to completion text");
    return c;
  }

 private:
  HttpBackendConfig config_;
  std::string api_key_;
};

}  // namespace halo
