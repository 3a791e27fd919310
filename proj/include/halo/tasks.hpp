#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "halo/pipeline.hpp"

namespace halo {

// ---------------------------------------------------------------------------
// Multi-hop question answering
// ---------------------------------------------------------------------------

struct MultiHopResult {
  std::string question;
  std::vector<SentenceTrace> steps;
  std::optional<std::string> final_answer;
};

// Carries the steps completed before a backend or retrieval error.
struct MultiHopRunError : Error {
  MultiHopRunError(const std::string& what, MultiHopResult result)
      : Error(what), partial(std::move(result)) {}
  MultiHopResult partial;
};

// Matches the closing pattern of a reasoning chain, "So, the answer is X.",
// case-insensitively, and returns X with the trailing period stripped.
inline std::optional<std::string> extract_final_answer(
    std::string_view step_text) {
  constexpr std::string_view marker = "so, the answer is";
  std::size_t pos = text::ifind(step_text, marker);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = step_text.substr(pos + marker.size());
  rest = text::trim(rest);
  while (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
  rest = text::trim(rest);
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

// Answer a bridge question one reasoning step at a time, running every step
// through the same detection/mitigation path as article sentences. The loop
// ends when a step carries the final-answer pattern or the step budget runs
// out; an absent final_answer means no step matched.
inline MultiHopResult run_multihop(const CompletionBackend& backend,
                                   const Retriever& retriever,
                                   const std::string& question,
                                   const PipelineConfig& config,
                                   int step_budget = 6) {
  config.validate();
  if (text::trim(question).empty())
    throw ConfigError("question must be non-empty");
  if (step_budget < 1) throw ConfigError("step_budget must be >= 1");

  MultiHopResult result;
  result.question = question;
  std::vector<std::string> accepted;

  try {
    for (int k = 0; k < step_budget; ++k) {
      std::string context = prompts::multihop_prompt(question, accepted);
      Completion completion = backend.complete(context, config.params);
      if (text::trim(completion.text).empty()) break;

      SegmentResult segment = segment_first_sentence(completion.text);
      std::string sentence = text::trim_copy(segment.sentence);

      SentenceTrace trace;
      trace.index = k;
      trace.raw_sentence = sentence;
      trace.segmentation_complete = segment.complete;
      if (!segment.complete) {
        result.steps.push_back(std::move(trace));
        break;
      }

      std::vector<TokenLogprob> sentence_tokens =
          detail::tokens_covering_prefix(completion.tokens,
                                         segment.sentence.size());

      // The question stands in for the article topic in validation prompts.
      detail::SentenceStep step = detail::detect_and_mitigate(
          backend, retriever, sentence, question, context, sentence_tokens,
          config, config.multihop_wh_questions);

      trace.concepts = std::move(step.concepts);
      trace.validation = std::move(step.validation);
      trace.repair = std::move(step.repair);
      trace.revalidation = std::move(step.revalidation);
      trace.accepted_sentence = std::move(step.accepted_sentence);
      accepted.push_back(trace.accepted_sentence);

      std::optional<std::string> answer =
          extract_final_answer(trace.accepted_sentence);
      result.steps.push_back(std::move(trace));
      if (answer) {
        result.final_answer = std::move(answer);
        break;
      }
    }
  } catch (const Error& e) {
    std::throw_with_nested(MultiHopRunError(
        std::string("multi-hop run interrupted: ") + e.what(), result));
  }
  return result;
}

// ---------------------------------------------------------------------------
// False premise questions
// ---------------------------------------------------------------------------

struct PremiseReport {
  std::string question;
  std::vector<Evidence> evidence;
  std::string premise_reply;  // raw reply of the premise check
  bool premise_ok = true;
  std::optional<std::string> rectified_question;
  bool rectified_changed = false;
  bool rectification_failed = false;
};

// Check whether the question's assumptions hold against retrieved evidence.
// Only an explicit leading "No" marks the premise as false; an unparseable
// reply leaves the question untouched, since rewriting a correct question is
// worse than answering a bad one.
inline PremiseReport check_premise(const CompletionBackend& backend,
                                   const Retriever& retriever,
                                   const std::string& question,
                                   const RetrievalConfig& retrieval,
                                   const GenerationParams& params = {}) {
  if (text::trim(question).empty())
    throw ConfigError("question must be non-empty");

  PremiseReport report;
  report.question = question;
  report.evidence = retriever.retrieve(question, retrieval);

  std::vector<std::string> snippets;
  for (const Evidence& e : report.evidence) snippets.push_back(e.text);
  GenerationParams p = params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::premise_check_prompt(prompts::evidence_block(snippets),
                                    question),
      p);
  report.premise_reply = reply.text;
  report.premise_ok = parse_verdict(reply.text).answer != VerdictAnswer::no;
  return report;
}

// Rewrite a false-premise question; the context is the premise check's raw
// reply. Throws EmptyRectification on a blank reply.
inline std::string rectify_question(const CompletionBackend& backend,
                                    const std::string& question,
                                    const std::string& premise_reply,
                                    const GenerationParams& params = {}) {
  GenerationParams p = params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::rectify_question_prompt(premise_reply, question), p);
  std::string rectified = text::first_line(reply.text);
  if (rectified.empty())
    throw EmptyRectification("backend returned a blank rectification for: " +
                             question);
  return rectified;
}

struct FalsePremiseResult {
  PremiseReport report;
  std::string answer;
};

// Full false-premise flow: check the premise, rectify the question when it
// fails, then answer whichever question survived with the evidence as
// context. A true-premise question reaches the answer prompt unchanged.
inline FalsePremiseResult run_false_premise(const CompletionBackend& backend,
                                            const Retriever& retriever,
                                            const std::string& question,
                                            const PipelineConfig& config) {
  config.validate();
  FalsePremiseResult result;
  result.report = check_premise(backend, retriever, question, config.retrieval,
                                config.params);

  std::string target = question;
  if (!result.report.premise_ok) {
    try {
      std::string rectified = rectify_question(
          backend, question, result.report.premise_reply, config.params);
      result.report.rectified_changed = rectified != question;
      result.report.rectified_question = std::move(rectified);
    } catch (const EmptyRectification&) {
      result.report.rectified_question = question;
      result.report.rectification_failed = true;
    }
    target = *result.report.rectified_question;
  }

  std::vector<std::string> snippets;
  for (const Evidence& e : result.report.evidence) snippets.push_back(e.text);
  GenerationParams p = config.params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::answer_with_context_prompt(prompts::evidence_block(snippets),
                                          target),
      p);
  result.answer = text::trim_copy(reply.text);
  return result;
}

}  // namespace halo
