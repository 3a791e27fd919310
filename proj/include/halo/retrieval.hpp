#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "halo/backend.hpp"
#include "halo/errors.hpp"
#include "halo/text.hpp"

namespace halo {

enum class RetrievalMode { web_search, local_corpus, self_inquiry };

inline std::string_view to_string(RetrievalMode m) {
  switch (m) {
    case RetrievalMode::web_search: return "web_search";
    case RetrievalMode::local_corpus: return "local_corpus";
    case RetrievalMode::self_inquiry: return "self_inquiry";
  }
  return "web_search";
}

inline std::optional<RetrievalMode> retrieval_mode_from_string(
    std::string_view s) {
  if (s == "web_search") return RetrievalMode::web_search;
  if (s == "local_corpus") return RetrievalMode::local_corpus;
  if (s == "self_inquiry") return RetrievalMode::self_inquiry;
  return std::nullopt;
}

// A retrieved knowledge snippet. `locator` is a URL, a document id, or
// "model" for self-inquiry answers.
struct Evidence {
  std::string text;
  RetrievalMode source = RetrievalMode::web_search;
  std::string locator;
};

struct RetrievalConfig {
  RetrievalMode mode = RetrievalMode::web_search;
  int top_k = 3;
  int max_snippet_chars = 1000;

  void validate() const {
    if (top_k < 1) throw ConfigError("retrieval top_k must be >= 1");
    if (max_snippet_chars < 1)
      throw ConfigError("retrieval max_snippet_chars must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Local corpus
// ---------------------------------------------------------------------------

// In-memory document store ranked by case-folded word overlap with the
// query; ties break on document id. Loadable from a directory of UTF-8 text
// files (id = filename) or a JSONL file of {"id", "text"}.
class LocalCorpus {
 public:
  LocalCorpus() = default;

  void add_document(std::string id, std::string body) {
    docs_.push_back({std::move(id), std::move(body)});
  }

  static LocalCorpus from_path(const std::string& path) {
    namespace fs = std::filesystem;
    LocalCorpus corpus;
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(path))
        if (entry.is_regular_file()) files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        std::ifstream in(file);
        std::ostringstream body;
        body << in.rdbuf();
        corpus.add_document(file.filename().string(), body.str());
      }
      return corpus;
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus: " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      nlohmann::json doc = nlohmann::json::parse(line);
      corpus.add_document(doc.at("id").get<std::string>(),
                          doc.at("text").get<std::string>());
    }
    return corpus;
  }

  // Top-k documents by distinct-word overlap; zero-overlap documents are
  // never returned.
  std::vector<std::pair<std::string, std::string>> rank(
      std::string_view query, int top_k) const {
    std::unordered_set<std::string> query_words;
    for (auto& w : text::fold_words(query)) query_words.insert(std::move(w));

    struct Ranked {
      int overlap;
      const std::pair<std::string, std::string>* doc;
    };
    std::vector<Ranked> ranked;
    for (const auto& doc : docs_) {
      std::unordered_set<std::string> doc_words;
      for (auto& w : text::fold_words(doc.second)) doc_words.insert(std::move(w));
      int overlap = 0;
      for (const auto& w : query_words)
        if (doc_words.count(w)) ++overlap;
      if (overlap > 0) ranked.push_back({overlap, &doc});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      return a.doc->first < b.doc->first;
    });
    std::vector<std::pair<std::string, std::string>> out;
    for (const Ranked& r : ranked) {
      if (static_cast<int>(out.size()) >= top_k) break;
      out.push_back(*r.doc);
    }
    return out;
  }

  bool empty() const { return docs_.empty(); }

 private:
  std::vector<std::pair<std::string, std::string>> docs_;
};

// ---------------------------------------------------------------------------
// Web search client
// ---------------------------------------------------------------------------

inline constexpr const char* kSearchApiKeyEnvVar = "HALO_SEARCH_API_KEY";

// Any search API returning a JSON list of results with snippet and URL
// fields works; the result-list path and field names are configurable.
struct WebSearchConfig {
  std::string base_url;             // e.g. https://api.example.com
  std::string search_path = "/search";
  std::string query_param = "q";
  std::string results_path = "webPages.value";  // dotted path to the list
  std::string snippet_field = "snippet";
  std::string url_field = "url";
  std::string api_key_header = "Ocp-Apim-Subscription-Key";
  int timeout_seconds = 30;
};

namespace detail {

inline const nlohmann::json* resolve_json_path(const nlohmann::json& doc,
                                               std::string_view dotted) {
  const nlohmann::json* node = &doc;
  for (const std::string& part : text::split(dotted, '.')) {
    if (part.empty()) continue;
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

inline std::string clip(std::string s, int max_chars) {
  if (static_cast<int>(s.size()) > max_chars)
    s.resize(static_cast<std::size_t>(max_chars));
  return s;
}

}  // namespace detail

class WebSearchClient {
 public:
  explicit WebSearchClient(WebSearchConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
      throw ConfigError("web search requires a base URL");
    if (const char* key = std::getenv(kSearchApiKeyEnvVar)) api_key_ = key;
  }

  std::vector<Evidence> search(std::string_view query, int top_k,
                               int max_snippet_chars) const {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace(config_.api_key_header, api_key_);

    httplib::Params params{{config_.query_param, std::string(query)}};
    auto res = client.Get(config_.search_path, params, headers);
    if (!res)
      throw SearchUnreachable("search request to " + config_.base_url +
                              " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw SearchUnreachable("search endpoint returned HTTP " +
                              std::to_string(res->status));

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw SearchUnreachable(std::string("search reply is not JSON: ") +
                              e.what());
    }
    const nlohmann::json* results =
        detail::resolve_json_path(doc, config_.results_path);
    if (results == nullptr || !results->is_array()) return {};

    std::vector<Evidence> evidence;
    for (const auto& item : *results) {
      if (static_cast<int>(evidence.size()) >= top_k) break;
      if (!item.contains(config_.snippet_field)) continue;
      std::string snippet = item[config_.snippet_field].get<std::string>();
      if (snippet.empty()) continue;
      Evidence e;
      e.text = detail::clip(std::move(snippet), max_snippet_chars);
      e.source = RetrievalMode::web_search;
      e.locator = item.value(config_.url_field, std::string());
      evidence.push_back(std::move(e));
    }
    return evidence;
  }

 private:
  WebSearchConfig config_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Retriever
// ---------------------------------------------------------------------------

// Dispatches a query to whichever knowledge source the config names. Every
// returned Evidence carries the mode it came from. An empty result is not an
// error; callers decide what an unverifiable concept means.
class Retriever {
 public:
  Retriever() = default;

  void set_corpus(LocalCorpus corpus) { corpus_ = std::move(corpus); }
  void set_web_client(WebSearchClient client) { web_ = std::move(client); }
  void set_backend(const CompletionBackend* backend) { backend_ = backend; }

  std::vector<Evidence> retrieve(const std::string& query,
                                 const RetrievalConfig& config) const {
    config.validate();
    if (text::trim(query).empty())
      throw ConfigError("retrieval query must be non-empty");

    switch (config.mode) {
      case RetrievalMode::local_corpus: {
        std::vector<Evidence> out;
        for (auto& [id, body] : corpus_.rank(query, config.top_k)) {
          out.push_back({detail::clip(body, config.max_snippet_chars),
                         RetrievalMode::local_corpus, id});
        }
        return out;
      }
      case RetrievalMode::web_search: {
        if (!web_)
          throw ConfigError("web_search retrieval requires a search client");
        return web_->search(query, config.top_k, config.max_snippet_chars);
      }
      case RetrievalMode::self_inquiry: {
        if (backend_ == nullptr)
          throw ConfigError("self_inquiry retrieval requires a backend");
        GenerationParams params;
        params.logprobs_requested = false;
        Completion answer = backend_->complete(query, params);
        std::string body = text::trim_copy(answer.text);
        if (body.empty()) return {};
        return {{detail::clip(std::move(body), config.max_snippet_chars),
                 RetrievalMode::self_inquiry, "model"}};
      }
    }
    return {};
  }

 private:
  LocalCorpus corpus_;
  std::optional<WebSearchClient> web_;
  const CompletionBackend* backend_ = nullptr;
};

}  // namespace halo
