#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "halo/backend.hpp"
#include "halo/config.hpp"
#include "halo/pipeline.hpp"
#include "halo/retrieval.hpp"

// Builders that turn a flat Config into wired components. Key reference is
// in the README.

namespace halo {

inline std::unique_ptr<CompletionBackend> make_backend(
    const Config& cfg, const std::filesystem::path& base_dir = {}) {
  std::string mode = cfg.get_or("backend.mode", "scripted");
  if (mode == "scripted") {
    std::filesystem::path script = cfg.require("backend.script");
    if (script.is_relative() && !base_dir.empty()) script = base_dir / script;
    return std::make_unique<ScriptedBackend>(
        ScriptedBackend::from_file(script.string()));
  }
  if (mode == "http") {
    HttpBackendConfig http;
    http.base_url = cfg.require("backend.base_url");
    http.completion_path =
        cfg.get_or("backend.completion_path", http.completion_path);
    http.timeout_seconds =
        cfg.get_int("backend.timeout_seconds", http.timeout_seconds);
    return std::make_unique<HttpBackend>(std::move(http));
  }
  throw ConfigError("unknown backend.mode: " + mode);
}

inline GenerationParams make_generation_params(const Config& cfg) {
  GenerationParams params;
  params.max_tokens = cfg.get_int("generation.max_tokens", params.max_tokens);
  params.temperature =
      cfg.get_double("generation.temperature", params.temperature);
  params.logprobs_requested =
      cfg.get_bool("generation.logprobs", params.logprobs_requested);
  if (auto stops = cfg.get("generation.stop")) {
    for (const std::string& s : text::split(*stops, '|'))
      if (!s.empty()) params.stop_sequences.push_back(s);
  }
  params.validate();
  return params;
}

inline DetectionPolicy make_detection_policy(const Config& cfg) {
  DetectionPolicy policy;
  std::string method = cfg.get_or("scoring.method", "min");
  auto parsed = score_method_from_string(method);
  if (!parsed) throw ConfigError("unknown scoring.method: " + method);
  policy.method = *parsed;
  policy.threshold = cfg.get_double("scoring.threshold", policy.threshold);
  if (policy.threshold < 0.0 || policy.threshold > 1.0)
    throw ConfigError("scoring.threshold must be in [0,1]");
  policy.validate_unscored =
      cfg.get_bool("scoring.validate_unscored", policy.validate_unscored);
  policy.strict = cfg.get_bool("validation.strict", policy.strict);
  return policy;
}

inline RetrievalConfig make_retrieval_config(const Config& cfg) {
  RetrievalConfig retrieval;
  std::string mode = cfg.get_or("retrieval.mode", "web_search");
  auto parsed = retrieval_mode_from_string(mode);
  if (!parsed) throw ConfigError("unknown retrieval.mode: " + mode);
  retrieval.mode = *parsed;
  retrieval.top_k = cfg.get_int("retrieval.top_k", retrieval.top_k);
  retrieval.max_snippet_chars =
      cfg.get_int("retrieval.max_snippet_chars", retrieval.max_snippet_chars);
  retrieval.validate();
  return retrieval;
}

inline Retriever make_retriever(const Config& cfg,
                                const CompletionBackend* backend,
                                const std::filesystem::path& base_dir = {}) {
  Retriever retriever;
  retriever.set_backend(backend);
  if (auto corpus = cfg.get("retrieval.corpus")) {
    std::filesystem::path path = *corpus;
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    retriever.set_corpus(LocalCorpus::from_path(path.string()));
  }
  if (auto endpoint = cfg.get("retrieval.endpoint")) {
    WebSearchConfig web;
    web.base_url = *endpoint;
    web.search_path = cfg.get_or("retrieval.search_path", web.search_path);
    web.query_param = cfg.get_or("retrieval.query_param", web.query_param);
    web.results_path = cfg.get_or("retrieval.results_path", web.results_path);
    web.snippet_field =
        cfg.get_or("retrieval.snippet_field", web.snippet_field);
    web.url_field = cfg.get_or("retrieval.url_field", web.url_field);
    web.api_key_header =
        cfg.get_or("retrieval.api_key_header", web.api_key_header);
    web.timeout_seconds =
        cfg.get_int("retrieval.timeout_seconds", web.timeout_seconds);
    retriever.set_web_client(WebSearchClient(std::move(web)));
  }
  return retriever;
}

inline ConceptMethod make_concept_method(const Config& cfg) {
  std::string method = cfg.get_or("concepts.method", "model_instruction");
  if (method == "model_instruction") return ConceptMethod::model_instruction;
  if (method == "rule_based") return ConceptMethod::rule_based;
  if (method == "external_tool") return ConceptMethod::external_tool;
  throw ConfigError("unknown concepts.method: " + method);
}

inline PipelineConfig make_pipeline_config(const Config& cfg) {
  PipelineConfig pipeline;
  pipeline.num_sentences =
      cfg.get_int("generation.num_sentences", pipeline.num_sentences);
  pipeline.params = make_generation_params(cfg);
  pipeline.policy = make_detection_policy(cfg);
  pipeline.retrieval = make_retrieval_config(cfg);
  pipeline.concept_method = make_concept_method(cfg);
  pipeline.mitigation_enabled =
      cfg.get_bool("mitigation.enabled", pipeline.mitigation_enabled);
  pipeline.revalidate_after_repair = cfg.get_bool(
      "mitigation.revalidate", pipeline.revalidate_after_repair);
  pipeline.multihop_wh_questions = cfg.get_bool(
      "multihop.wh_questions", pipeline.multihop_wh_questions);
  pipeline.validate();
  return pipeline;
}

}  // namespace halo
