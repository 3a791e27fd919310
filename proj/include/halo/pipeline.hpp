#pragma once

#include <cctype>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "halo/backend.hpp"
#include "halo/concepts.hpp"
#include "halo/diag.hpp"
#include "halo/mitigation.hpp"
#include "halo/prompts.hpp"
#include "halo/retrieval.hpp"
#include "halo/scoring.hpp"
#include "halo/validation.hpp"

namespace halo {

// ---------------------------------------------------------------------------
// Sentence segmentation
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_abbreviation(std::string_view token) {
  static const std::unordered_set<std::string> abbreviations = {
      "mr",   "mrs",  "ms",   "dr",   "prof", "sr",   "jr",    "st",
      "mt",   "ph.d", "m.d",  "b.a",  "m.a",  "b.sc", "m.sc",  "d.phil",
      "u.s",  "u.k",  "u.n",  "e.g",  "i.e",  "etc",  "vs",    "inc",
      "ltd",  "co",   "corp", "no",   "fig",  "vol",  "ed",    "est",
      "dept", "univ", "approx"};
  return abbreviations.count(text::to_lower(token)) > 0;
}

// Single capital letter before the period: an initial ("John R. Smith").
inline bool is_initial(std::string_view token) {
  return token.size() == 1 &&
         std::isupper(static_cast<unsigned char>(token[0]));
}

inline bool is_closing_mark(char c) {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}

}  // namespace detail

struct SegmentResult {
  std::string sentence;
  bool complete = false;
};

// The prefix of `raw` up to and including the first sentence terminator
// (. ! ?) that is not part of a decimal number, a known abbreviation, or an
// initial. Closing quotes/brackets immediately after the terminator are kept
// with the sentence. complete=false when no terminator is found.
inline SegmentResult segment_first_sentence(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c != '.' && c != '!' && c != '?') continue;

    // The terminator must be followed by end-of-text, whitespace, or a
    // closing mark; "Ph.D" style internal periods fail this test.
    std::size_t next = i + 1;
    if (next < raw.size() && !text::is_space(raw[next]) &&
        !detail::is_closing_mark(raw[next]))
      continue;

    if (c == '.') {
      // Decimal number: digit on both sides.
      bool digit_before =
          i > 0 && std::isdigit(static_cast<unsigned char>(raw[i - 1]));
      bool digit_after = next < raw.size() &&
                         std::isdigit(static_cast<unsigned char>(raw[next]));
      if (digit_before && digit_after) continue;

      // Token ending at this period, including internal periods ("Ph.D").
      std::size_t start = i;
      while (start > 0 &&
             (std::isalpha(static_cast<unsigned char>(raw[start - 1])) ||
              raw[start - 1] == '.'))
        --start;
      std::string_view token = raw.substr(start, i - start);
      while (!token.empty() && token.front() == '.') token.remove_prefix(1);
      if (detail::is_abbreviation(token) || detail::is_initial(token))
        continue;
    }

    std::size_t end = i + 1;
    while (end < raw.size() && detail::is_closing_mark(raw[end])) ++end;
    return {std::string(raw.substr(0, end)), true};
  }
  return {std::string(raw), false};
}

// ---------------------------------------------------------------------------
// Pipeline configuration and traces
// ---------------------------------------------------------------------------

struct PipelineConfig {
  int num_sentences = 5;
  GenerationParams params;
  DetectionPolicy policy;
  RetrievalConfig retrieval;
  ConceptMethod concept_method = ConceptMethod::model_instruction;
  bool mitigation_enabled = true;
  bool revalidate_after_repair = false;
  // Multi-hop only: additionally generate (never verify) a Wh question per
  // validated concept.
  bool multihop_wh_questions = false;

  void validate() const {
    if (num_sentences < 1) throw ConfigError("num_sentences must be >= 1");
    params.validate();
    retrieval.validate();
  }
};

// Everything that happened to one generated sentence. When segmentation
// found no boundary the raw text is recorded, nothing is validated, and the
// fragment is not accepted into the article.
struct SentenceTrace {
  int index = 0;
  std::string raw_sentence;
  bool segmentation_complete = true;
  std::vector<ConceptScore> concepts;
  ValidationOutcome validation;
  std::optional<RepairResult> repair;
  std::optional<ValidationOutcome> revalidation;
  std::string accepted_sentence;
};

struct GenerationReport {
  std::string topic;
  std::vector<SentenceTrace> traces;
  std::string final_text;
};

// Thrown when a backend or retrieval error interrupts a run; carries the
// sentences completed so far.
struct PipelineRunError : Error {
  PipelineRunError(const std::string& what, GenerationReport report)
      : Error(what), partial(std::move(report)) {}
  GenerationReport partial;
};

// ---------------------------------------------------------------------------
// Shared per-sentence detection step
// ---------------------------------------------------------------------------

namespace detail {

// Tokens of the completion that cover the segmented prefix.
inline std::vector<TokenLogprob> tokens_covering_prefix(
    const std::vector<TokenLogprob>& tokens, std::size_t prefix_len) {
  std::vector<TokenLogprob> out;
  std::size_t consumed = 0;
  for (const TokenLogprob& t : tokens) {
    if (consumed >= prefix_len) break;
    out.push_back(t);
    consumed += t.token_text.size();
  }
  return out;
}

struct SentenceStep {
  std::vector<ConceptScore> concepts;
  ValidationOutcome validation;
  std::optional<RepairResult> repair;
  std::optional<ValidationOutcome> revalidation;
  std::string accepted_sentence;
};

// Detection and, when flagged, mitigation for one sentence. This is the same
// path for article generation and multi-hop steps; `context` is the prompt
// the sentence was generated under and `topic` feeds the validation/repair
// templates.
inline SentenceStep detect_and_mitigate(
    const CompletionBackend& backend, const Retriever& retriever,
    const std::string& sentence, const std::string& topic,
    const std::string& context,
    const std::vector<TokenLogprob>& sentence_tokens,
    const PipelineConfig& config, bool generate_wh_questions = false) {
  SentenceStep step;

  std::vector<Concept> extracted = extract_concepts(
      backend, sentence, context, config.concept_method, config.params);
  for (Concept& c : extracted) {
    Concept aligned =
        align_concept_tokens(std::move(c), sentence_tokens, sentence);
    step.concepts.push_back(
        make_concept_score(std::move(aligned), sentence_tokens,
                           config.policy.method));
  }

  std::vector<ConceptScore> ordered =
      select_uncertain(step.concepts, config.policy);
  step.validation =
      validate_sentence(backend, retriever, sentence, topic, ordered,
                        config.retrieval, config.policy, config.params,
                        generate_wh_questions);

  step.accepted_sentence = sentence;
  if (step.validation.hallucination_detected && config.mitigation_enabled) {
    const std::vector<Evidence>& evidence =
        step.validation.per_concept.back().evidence;
    if (evidence.empty()) {
      warn("detection without evidence; keeping original sentence: " +
           sentence);
    } else {
      try {
        step.repair = repair_sentence(backend, sentence, topic, evidence,
                                      config.params);
        step.accepted_sentence = step.repair->repaired;
      } catch (const EmptyRepair&) {
        warn("empty repair; keeping original sentence: " + sentence);
      }
    }

    if (step.repair && config.revalidate_after_repair) {
      std::vector<Concept> again =
          extract_concepts(backend, step.accepted_sentence, context,
                           config.concept_method, config.params);
      std::vector<ConceptScore> rescored;
      for (Concept& c : again) {
        // The repaired sentence has no token probabilities of its own.
        rescored.push_back(make_concept_score(std::move(c), {},
                                              config.policy.method));
      }
      step.revalidation = validate_sentence(
          backend, retriever, step.accepted_sentence, topic,
          select_uncertain(rescored, config.policy), config.retrieval,
          config.policy, config.params);
    }
  }
  return step;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Article generation loop
// ---------------------------------------------------------------------------

// Generate up to num_sentences sentences about the topic, validating each one
// before it enters the context for the next. A repaired sentence replaces the
// raw one in that context, so later sentences continue from corrected text
// rather than from the hallucination.
inline GenerationReport run_article(const CompletionBackend& backend,
                                    const Retriever& retriever,
                                    const std::string& topic,
                                    const PipelineConfig& config) {
  config.validate();
  if (text::trim(topic).empty()) throw ConfigError("topic must be non-empty");

  GenerationReport report;
  report.topic = topic;
  std::vector<std::string> accepted;

  try {
    for (int k = 0; k < config.num_sentences; ++k) {
      std::string context = prompts::article_generation_prompt(topic, accepted);
      Completion completion = backend.complete(context, config.params);
      if (text::trim(completion.text).empty()) break;  // backend stopped

      SegmentResult segment = segment_first_sentence(completion.text);
      std::string sentence = text::trim_copy(segment.sentence);

      SentenceTrace trace;
      trace.index = k;
      trace.raw_sentence = sentence;
      trace.segmentation_complete = segment.complete;
      if (!segment.complete) {
        // No boundary within the token budget; a fragment has no
        // well-defined concept set, so it is recorded but not accepted.
        report.traces.push_back(std::move(trace));
        break;
      }

      std::vector<TokenLogprob> sentence_tokens =
          detail::tokens_covering_prefix(completion.tokens,
                                         segment.sentence.size());
      detail::SentenceStep step =
          detail::detect_and_mitigate(backend, retriever, sentence, topic,
                                      context, sentence_tokens, config);

      trace.concepts = std::move(step.concepts);
      trace.validation = std::move(step.validation);
      trace.repair = std::move(step.repair);
      trace.revalidation = std::move(step.revalidation);
      trace.accepted_sentence = std::move(step.accepted_sentence);
      accepted.push_back(trace.accepted_sentence);
      report.traces.push_back(std::move(trace));
    }
  } catch (const Error& e) {
    report.final_text = text::join(accepted, " ");
    std::throw_with_nested(
        PipelineRunError(std::string("article run interrupted: ") + e.what(),
                         report));
  }

  report.final_text = text::join(accepted, " ");
  return report;
}

}  // namespace halo
